"""Randomized suites that compare the model against the brute-force walk oracle."""

from __future__ import annotations

from collections import Counter
from dataclasses import replace

import numpy as np

from .graph import AttributeSchema, Graph
from .model import AwareConfig, AwareParams, forward, init_params
from .synthetic import random_graph, walk_twin_graphs
from .walks import (
    ngram_recursion,
    ngram_reference,
    verify_general_identity,
    verify_vertex_expansion,
    verify_walk_identity,
    walk_statistics,
)

TOLERANCE = 1e-8
SUITES = ("walk-identity", "vertex-expansion", "general-identity", "ngram", "twin-graphs")

SIMPLE = AwareConfig(T=4, r=6, r_prime=6, L=1, score_mode="pairwise",
                     use_wv=False, use_wg=False, linear_sigma=True)


def random_case(rng: np.random.Generator, max_m: int = 8, max_k: int = 4, C: int = 1):
    m = int(rng.integers(1, max_m + 1))
    schema = AttributeSchema(tuple(int(rng.integers(1, max_k + 1)) for _ in range(C)))
    return random_graph(rng, m, float(rng.uniform(0.2, 0.7)), schema)


def random_params(config: AwareConfig, schema: AttributeSchema, seed: int, ww_scale: float = 3.0) -> AwareParams:
    """Model init with a stretched W_w so the walk weights spread out."""
    p = init_params(config, schema, seed)
    if p.W_w is not None:
        p.W_w = p.W_w * ww_scale
    return p


def _record(name, graph, n, seed, residual, tol=TOLERANCE, **extra):
    return {"check": name, "seed": seed, "m": graph.vertex_count, "n": n,
            "residual": float(residual), "pass": bool(residual <= tol), **extra}


def walk_identity_suite(seed: int = 0, graphs: int = 100, max_n: int = 4) -> list[dict]:
    rng = np.random.default_rng(seed)
    out = []
    for k in range(graphs):
        g = random_case(rng)
        p = random_params(SIMPLE, g.schema, seed=seed * 100_003 + k)
        for n in range(1, max_n + 1):
            out.append(_record("walk-identity", g, n, seed, verify_walk_identity(g, p, SIMPLE, n)))
    return out


def vertex_expansion_suite(seed: int = 0, graphs: int = 100, max_n: int = 4) -> list[dict]:
    rng = np.random.default_rng(seed)
    out = []
    for k in range(graphs):
        g = random_case(rng)
        p = random_params(SIMPLE, g.schema, seed=seed * 100_003 + k)
        for n in range(1, max_n + 1):
            out.append(_record("vertex-expansion", g, n, seed, verify_vertex_expansion(g, p, SIMPLE, n)))
    return out


def general_identity_suite(seed: int = 0, graphs: int = 30, max_n: int = 4,
                           alphas=(0.0, 0.1, 1.0)) -> list[dict]:
    rng = np.random.default_rng(seed)
    out = []
    for alpha in alphas:
        cfg = AwareConfig(T=max_n, r=7, r_prime=5, L=1, alpha=alpha, score_mode="pairwise")
        for k in range(graphs):
            g = random_case(rng, max_m=7, max_k=3, C=2)
            p = random_params(cfg, g.schema, seed=seed * 100_003 + k)
            for n in range(1, max_n + 1):
                out.append(_record("general-identity", g, n, seed,
                                   verify_general_identity(g, p, cfg, n), alpha=alpha))
    # reduction: identity W_v and W_g, linear activation, one attribute
    for k in range(graphs):
        g = random_case(rng)
        p = random_params(SIMPLE, g.schema, seed=seed * 100_003 + k)
        full = replace(SIMPLE, use_wv=True, use_wg=True)
        q = AwareParams(p.W, np.eye(SIMPLE.r), p.W_w, np.eye(SIMPLE.r), p.predictor)
        for n in range(1, max_n + 1):
            a = verify_general_identity(g, q, full, n)
            b = verify_walk_identity(g, p, SIMPLE, n)
            fa = forward(g, q, full)[1].f_per_level[n - 1]
            fb = forward(g, p, SIMPLE)[1].f_per_level[n - 1]
            gap = float(np.linalg.norm(fa - fb) / max(1e-12, np.linalg.norm(fb)))
            out.append(_record("general-reduction", g, n, seed, max(a, b, gap)))
    return out


def ngram_suite(seed: int = 0, graphs: int = 50, max_n: int = 4) -> list[dict]:
    """Unweighted simplified model against brute-force walk products and the plain recursion."""
    rng = np.random.default_rng(seed)
    cfg = replace(SIMPLE, use_ww=False)
    out = []
    for k in range(graphs):
        g = random_case(rng)
        p = init_params(cfg, g.schema, seed * 100_003 + k)
        _, trace = forward(g, p, cfg)
        rec = ngram_recursion(g, p.W, cfg.T)
        for n in range(1, max_n + 1):
            f_n = trace.f_per_level[n - 1]
            ref = ngram_reference(g, p.W, n)
            res = float(np.linalg.norm(f_n - ref) / max(1e-12, np.linalg.norm(f_n)))
            exact = bool(np.array_equal(f_n, rec[n - 1]))
            rec_ok = res <= 1e-9 and exact
            out.append(_record("ngram", g, n, seed, res, tol=1e-9, recursion_exact=exact) | {"pass": rec_ok})
    return out


def degree_multiset(g: Graph) -> list[int]:
    return sorted(int(d) for d in g.degrees)


def isomorphic(a: Graph, b: Graph, max_vertices: int = 9) -> bool:
    """Attribute-preserving isomorphism by backtracking; desk-scale only."""
    m = a.vertex_count
    if m != b.vertex_count or a.edge_count != b.edge_count:
        return False
    if m > max_vertices:
        raise ValueError(f"brute-force isomorphism is limited to {max_vertices} vertices")
    key_a = [(int(a.degrees[i]), tuple(a.attrs[i])) for i in range(m)]
    key_b = [(int(b.degrees[i]), tuple(b.attrs[i])) for i in range(m)]
    if sorted(key_a) != sorted(key_b):
        return False
    A, B = a.adjacency, b.adjacency
    image = [-1] * m
    used = [False] * m

    def extend(i: int) -> bool:
        if i == m:
            return True
        for j in range(m):
            if used[j] or key_a[i] != key_b[j]:
                continue
            if any(A[i, k] != B[j, image[k]] for k in range(i)):
                continue
            image[i], used[j] = j, True
            if extend(i + 1):
                return True
            used[j] = False
        return False

    return extend(0)


def twin_graphs_report(seed: int = 0) -> dict:
    a, b = walk_twin_graphs()
    same_stats = {n: walk_statistics(a, n).counts == walk_statistics(b, n).counts for n in (1, 2, 3)}
    cfg = AwareConfig(T=3, r=8, r_prime=8, L=1, use_wv=False, use_ww=False, use_wg=False, linear_sigma=True)
    p = init_params(cfg, a.schema, seed)
    fa, _ = forward(a, p, cfg)
    fb, _ = forward(b, p, cfg)
    res = float(np.linalg.norm(fa - fb) / max(1e-12, np.linalg.norm(fa)))
    different_degrees = degree_multiset(a) != degree_multiset(b)
    return {
        "check": "twin-graphs", "seed": seed,
        "same_walk_statistics": {str(k): v for k, v in same_stats.items()},
        "degree_multisets": [degree_multiset(a), degree_multiset(b)],
        "different_degrees": different_degrees,
        "isomorphic": isomorphic(a, b),
        "residual": res,
        "pass": bool(all(same_stats.values()) and different_degrees and res <= 1e-10),
    }


def run_suite(name: str, seed: int = 0, graphs: int | None = None) -> list[dict]:
    kw = {} if graphs is None else {"graphs": graphs}
    if name == "walk-identity":
        return walk_identity_suite(seed, **kw)
    if name == "vertex-expansion":
        return vertex_expansion_suite(seed, **kw)
    if name == "general-identity":
        return general_identity_suite(seed, **kw)
    if name == "ngram":
        return ngram_suite(seed, **kw)
    if name == "twin-graphs":
        return [twin_graphs_report(seed)]
    raise ValueError(f"unknown suite {name!r}; expected one of {SUITES}")


def summarize(records: list[dict]) -> dict:
    by = Counter(r["check"] for r in records)
    worst: dict[str, float] = {}
    for r in records:
        worst[r["check"]] = max(worst.get(r["check"], 0.0), r["residual"])
    return {"checks": dict(by), "max_residual": worst, "pass": all(r["pass"] for r in records)}
