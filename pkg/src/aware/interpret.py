"""Edge importance from the last attention matrix, and W_g / predictor alignment."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ContractError
from .graph import Graph
from .model import AwareConfig, AwareParams, ForwardTrace, forward

DEFAULT_THRESHOLD = 1.0


@dataclass(frozen=True)
class EdgeImportance:
    scores: dict[tuple[int, int], float]
    threshold: float = DEFAULT_THRESHOLD

    def to_dict(self) -> dict:
        return {
            "edges": [{"u": u, "v": v, "score": s} for (u, v), s in sorted(self.scores.items())],
            "threshold": self.threshold,
        }


@dataclass(frozen=True)
class Substructure:
    edges: tuple[tuple[int, int], ...]
    vertices: tuple[int, ...]
    components: tuple[tuple[int, ...], ...]


def edge_importance(trace: ForwardTrace, graph: Graph, threshold: float = DEFAULT_THRESHOLD) -> EdgeImportance:
    """Score of edge {i, j} is ``S[i, j] + S[j, i]`` for the last attention matrix."""
    if not trace.S_seq:
        raise ContractError("edge importance needs T >= 2; the trace has no attention matrix")
    S = trace.S_seq[-1]
    scores = {(i, j): float(S[i, j] + S[j, i]) for i, j in graph.edges()}
    return EdgeImportance(scores, threshold)


def extract_substructure(graph: Graph, importance: EdgeImportance, threshold: float | None = None) -> Substructure:
    """Edges scoring at least ``threshold`` and the connected components they form."""
    t = importance.threshold if threshold is None else threshold
    kept = tuple(e for e, s in sorted(importance.scores.items()) if s >= t)
    verts = tuple(sorted({v for e in kept for v in e}))
    if not kept:
        return Substructure((), (), ())
    m = graph.vertex_count
    rows = [u for u, _ in kept]
    cols = [v for _, v in kept]
    _, comp = connected_components(csr_matrix((np.ones(len(kept)), (rows, cols)), shape=(m, m)), directed=False)
    groups: dict[int, list[int]] = {}
    for v in verts:
        groups.setdefault(int(comp[v]), []).append(v)
    components = tuple(sorted(tuple(g) for g in groups.values()))
    return Substructure(kept, verts, components)


def importance_gap(params: AwareParams, config: AwareConfig, graphs: Sequence[Graph],
                   motifs: Sequence[Sequence[tuple[int, int]]]) -> tuple[float, float]:
    """Mean importance of motif edges and of all other edges, over graphs with a motif."""
    motif_scores, background = [], []
    for g, motif in zip(graphs, motifs):
        if not motif:
            continue
        _, trace = forward(g, params, config)
        marked = set(map(tuple, motif))
        for e, s in edge_importance(trace, g).scores.items():
            (motif_scores if e in marked else background).append(s)
    if not motif_scores or not background:
        raise ContractError("need graphs with both motif and background edges")
    return float(np.mean(motif_scores)), float(np.mean(background))


def write_importance_json(importance: EdgeImportance, path) -> None:
    with open(path, "w") as fh:
        json.dump(importance.to_dict(), fh, indent=2)


def importance_to_dot(graph: Graph, importance: EdgeImportance, scale: float = 2.0) -> str:
    """Undirected DOT graph; each edge's penwidth is ``scale * score``."""
    lines = ["graph G {"]
    for v in range(graph.vertex_count):
        attr = "" if graph.attrs is None else f' [label="{v}:{",".join(str(int(a)) for a in graph.attrs[v])}"]'
        lines.append(f"  {v}{attr};")
    for (u, v), s in sorted(importance.scores.items()):
        lines.append(f'  {u} -- {v} [penwidth={scale * s:.6g}, label="{s:.4g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# singular vectors


def jacobi_eigh(S: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns eigenvalues in descending order and the matching eigenvectors as
    columns.
    """
    A = np.array(S, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or not np.allclose(A, A.T):
        raise ContractError("jacobi_eigh needs a symmetric matrix")
    n = A.shape[0]
    V = np.eye(n)
    scale = max(np.abs(A).max(), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q], J[q, p] = s, -s
                A = J.T @ A @ J
                V = V @ J
    vals = np.diag(A)
    order = np.argsort(-vals, kind="stable")
    return vals[order], V[:, order]


@dataclass
class PowerResult:
    singular_values: np.ndarray
    vectors: np.ndarray
    iterations: list[int]
    converged: list[bool]


def top_left_singular_vectors(M: np.ndarray, k: int = 3, tol: float = 1e-10, max_iter: int = 10_000,
                              seed: int = 0) -> PowerResult:
    """Leading left singular vectors of M by power iteration on ``M M^T`` with deflation.

    Each iterate is re-orthogonalized against the vectors already found; a
    vector is accepted when it moves by less than ``tol`` (up to sign).
    """
    B = M @ M.T
    n = B.shape[0]
    k = min(k, n)
    rng = np.random.default_rng(seed)
    found: list[np.ndarray] = []
    sv, iters, ok = [], [], []
    for _ in range(k):
        v = rng.standard_normal(n)
        for u in found:
            v -= (u @ v) * u
        v /= np.linalg.norm(v)
        done = False
        it = 0
        for it in range(1, max_iter + 1):
            w = B @ v
            for u in found:
                w -= (u @ w) * u
            norm = np.linalg.norm(w)
            if norm == 0.0:
                done = True
                break
            w /= norm
            if w @ v < 0:
                w = -w
            moved = np.linalg.norm(w - v)
            v = w
            if moved < tol:
                done = True
                break
        found.append(v)
        sv.append(np.sqrt(max(float(v @ B @ v), 0.0)))
        iters.append(it)
        ok.append(done)
        B = B - sv[-1] ** 2 * np.outer(v, v)
    return PowerResult(np.asarray(sv), np.column_stack(found), iters, ok)


@dataclass
class AlignmentReport:
    singular_values: np.ndarray
    top_singular_vectors: np.ndarray
    tiled: np.ndarray
    theta: np.ndarray
    cosines: np.ndarray
    random_p95: float
    degenerate: bool
    coords: list[tuple[str, float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "singular_values": self.singular_values.tolist(),
            "cosines": self.cosines.tolist(),
            "random_p95": self.random_p95,
            "degenerate": self.degenerate,
        }


def _abs_cos(a: np.ndarray, b: np.ndarray) -> float:
    return float(abs(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def random_cosine_percentile(theta: np.ndarray, samples: int = 1000, q: float = 95.0, seed: int = 0) -> float:
    """Percentile of ``|cos|`` between theta and random unit vectors of the same dimension."""
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((samples, theta.size))
    cos = np.abs(R @ theta) / (np.linalg.norm(R, axis=1) * np.linalg.norm(theta))
    return float(np.percentile(cos, q))


def pca_2d(points: np.ndarray) -> np.ndarray:
    """Project rows onto the top two principal components of the centred set."""
    X = points - points.mean(axis=0)
    _, _, Vt = np.linalg.svd(X, full_matrices=False)
    return X @ Vt[:2].T


def wg_alignment(params: AwareParams, config: AwareConfig, embeddings: np.ndarray | None = None,
                 k: int = 3, samples: int = 1000, seed: int = 0, tie_tol: float = 1e-8) -> AlignmentReport:
    """Compare the top singular directions of W_g, tiled T times, with a linear predictor.

    ``embeddings`` (graph embeddings as rows) are added to the PCA point set.
    Every point is scaled to unit norm before projection.
    """
    if len(params.predictor) != 1 or params.predictor[0][0].shape[0] != 1:
        raise ContractError("alignment needs a single-output linear predictor")
    theta = params.predictor[0][0].reshape(-1)
    rp = config.r_prime
    W_g = params.W_g if params.W_g is not None else np.eye(rp)
    power = top_left_singular_vectors(W_g, k, seed=seed)
    U = power.vectors
    tiled = np.vstack([U] * config.T)
    cos = np.asarray([_abs_cos(tiled[:, i], theta) for i in range(U.shape[1])])
    s = power.singular_values
    degenerate = bool(np.any(np.abs(np.diff(s)) <= tie_tol * max(s[0], 1e-300)))

    labels = [f"v{i + 1}" for i in range(U.shape[1])] + ["theta"]
    pts = [tiled[:, i] for i in range(U.shape[1])] + [theta]
    if embeddings is not None:
        for e in np.atleast_2d(embeddings):
            labels.append("embedding")
            pts.append(e)
    P = np.vstack([p / max(np.linalg.norm(p), 1e-300) for p in pts])
    xy = pca_2d(P)
    coords = [(lab, float(x), float(y)) for lab, (x, y) in zip(labels, xy)]
    return AlignmentReport(s, U, tiled, theta, cos, random_cosine_percentile(theta, samples, seed=seed),
                           degenerate, coords)


def write_alignment_csv(report: AlignmentReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "x", "y"])
        w.writerows(report.coords)
