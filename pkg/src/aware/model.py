"""The attentive walk-aggregating network: forward pass, predictor head, losses.

Two forward paths share the same parameters:

* :func:`forward` runs one graph with dense ``m x m`` attention matrices and
  returns a full :class:`ForwardTrace` (used by the oracles and by
  interpretation).
* :func:`forward_batch` runs many graphs at once on a directed edge list and
  is what training uses. Both agree to rounding error.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Tape, Var
from .errors import ContractError, SchemaError, ShapeError
from .graph import AttributeSchema, Graph

SCORE_MODES = ("softmax", "pairwise")
ABLATION_FLAGS = ("use_wv", "use_ww", "use_wg", "linear_sigma", "freeze_w", "linear_predictor")


@dataclass(frozen=True)
class AwareConfig:
    T: int = 6
    r: int = 100
    r_prime: int = 100
    L: int = 2
    alpha: float = 0.1
    head_alpha: float = 0.1
    score_mode: str = "softmax"
    use_wv: bool = True
    use_ww: bool = True
    use_wg: bool = True
    linear_sigma: bool = False
    freeze_w: bool = False
    linear_predictor: bool = False
    task_kind: str = "binary-classification"
    num_classes: int = 2

    def __post_init__(self):
        if self.T < 1 or self.r < 1 or self.r_prime < 1 or self.L < 1:
            raise ContractError("T, r, r_prime and L must all be at least 1")
        if not 0.0 <= self.alpha <= 1.0 or not 0.0 <= self.head_alpha <= 1.0:
            raise ContractError("leaky-ReLU slopes must lie in [0, 1]")
        if self.score_mode not in SCORE_MODES:
            raise ContractError(f"score_mode must be one of {SCORE_MODES}")
        if self.linear_sigma:
            object.__setattr__(self, "alpha", 1.0)
        if self.linear_predictor:
            object.__setattr__(self, "L", 1)
        if not self.use_wv:
            object.__setattr__(self, "r_prime", self.r)

    @property
    def output_dim(self) -> int:
        return self.num_classes if self.task_kind == "multiclass-classification" else 1

    @property
    def embedding_dim(self) -> int:
        return self.T * self.r_prime

    @classmethod
    def from_dict(cls, d: Mapping) -> AwareConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AwareParams:
    """Trainable matrices; ``None`` stands for an identity that is not learned."""

    W: np.ndarray
    W_v: np.ndarray | None
    W_w: np.ndarray | None
    W_g: np.ndarray | None
    predictor: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    def as_dict(self) -> dict[str, np.ndarray]:
        out = {"W": self.W}
        for name in ("W_v", "W_w", "W_g"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        for k, (w, b) in enumerate(self.predictor):
            out[f"P{k}_w"] = w
            out[f"P{k}_b"] = b
        return out

    @classmethod
    def from_dict(cls, d: Mapping[str, np.ndarray]) -> AwareParams:
        layers = []
        k = 0
        while f"P{k}_w" in d:
            layers.append((d[f"P{k}_w"], d[f"P{k}_b"]))
            k += 1
        return cls(d["W"], d.get("W_v"), d.get("W_w"), d.get("W_g"), layers)

    def trainable_names(self, config: AwareConfig) -> list[str]:
        return [k for k in self.as_dict() if not (k == "W" and config.freeze_w)]

    def copy(self) -> AwareParams:
        return AwareParams.from_dict({k: v.copy() for k, v in self.as_dict().items()})


def _uniform(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(cols)
    return rng.uniform(-bound, bound, size=(rows, cols))


def init_params(config: AwareConfig, schema: AttributeSchema, seed: int = 0) -> AwareParams:
    """Uniform(+-1/sqrt(fan_in)) entries; a frozen W is Rademacher +-1/sqrt(r)."""
    rng = np.random.default_rng(seed)
    K, r, rp = schema.total_width, config.r, config.r_prime
    if config.freeze_w:
        W = rng.choice([-1.0, 1.0], size=(r, K)) / np.sqrt(r)
    else:
        W = _uniform(rng, r, K)
    W_v = _uniform(rng, rp, r) if config.use_wv else None
    W_w = _uniform(rng, rp, rp) if config.use_ww else None
    W_g = _uniform(rng, rp, rp) if config.use_wg else None
    layers = []
    width = config.embedding_dim
    for k in range(config.L):
        out = config.output_dim if k == config.L - 1 else config.embedding_dim
        bound = 1.0 / np.sqrt(width)
        layers.append((_uniform(rng, out, width), rng.uniform(-bound, bound, size=(out, 1))))
        width = out
    return AwareParams(W, W_v, W_w, W_g, layers)


@dataclass
class ForwardTrace:
    F: np.ndarray
    F_seq: list[np.ndarray]
    S_seq: list[np.ndarray]
    f_per_level: list[np.ndarray]
    f_concat: np.ndarray


# ---------------------------------------------------------------------------
# single-graph operations


def _onehot(graph: Graph) -> np.ndarray:
    if graph.onehot is None:
        raise SchemaError("graph has no one-hot encoding; featurize it and attach a schema")
    return graph.onehot


def embed_vertices(graph: Graph, W) -> Var:
    H = _onehot(graph)
    Wv = W.value if isinstance(W, Var) else np.asarray(W)
    if Wv.shape[1] != H.shape[0]:
        raise ShapeError(f"W has {Wv.shape[1]} columns but the schema width is {H.shape[0]}")
    return ad.matmul(W, H)


def initial_latent(F, W_v, config: AwareConfig) -> Var:
    pre = F if W_v is None else ad.matmul(W_v, F)
    return ad.leaky_relu(pre, config.alpha)


def pairwise_scores(F_1, W_w, adjacency) -> Var:
    """``S_ji = logistic(f_j^T W_w f_i)`` on edges, from the fixed latent embeddings."""
    Z = ad.matmul(ad.transpose(F_1), ad.matmul(W_w, F_1))
    return ad.hadamard(ad.sigmoid(Z), adjacency)


def attention_scores(F_prev, W_w, adjacency, config: AwareConfig, F_1=None) -> Var:
    """Attention matrix for one iteration; entry ``[j, i]`` weighs the message j -> i."""
    A = np.asarray(adjacency, dtype=float)
    if not config.use_ww or W_w is None:
        return Var(A)
    if config.score_mode == "pairwise":
        return pairwise_scores(F_1 if F_1 is not None else F_prev, W_w, A)
    Z = ad.matmul(ad.transpose(F_prev), ad.matmul(W_w, F_prev))
    return ad.masked_column_softmax(Z, A)


def step(F_prev, S, adjacency, F_1) -> Var:
    return ad.hadamard(ad.matmul(F_prev, ad.hadamard(adjacency, S)), F_1)


def summarize(F_n, W_g, config: AwareConfig) -> Var:
    pre = F_n if W_g is None else ad.matmul(W_g, F_n)
    return ad.row_sum(ad.leaky_relu(pre, config.alpha))


def _forward_vars(graph: Graph, P: Mapping[str, Var | np.ndarray | None], config: AwareConfig):
    A = graph.adjacency
    F = embed_vertices(graph, P["W"])
    F1 = initial_latent(F, P.get("W_v"), config)
    W_w, W_g = P.get("W_w"), P.get("W_g")
    pairwise = None
    if config.use_ww and W_w is not None and config.score_mode == "pairwise":
        pairwise = pairwise_scores(F1, W_w, A)
    F_seq, S_seq = [F1], []
    levels = [summarize(F1, W_g, config)]
    F_n = F1
    for _ in range(2, config.T + 1):
        S = pairwise if pairwise is not None else attention_scores(F_n, W_w, A, config)
        F_n = step(F_n, S, A, F1)
        F_seq.append(F_n)
        S_seq.append(S)
        levels.append(summarize(F_n, W_g, config))
    return F, F_seq, S_seq, levels, ad.vstack(levels)


def _param_vars(params: AwareParams) -> dict:
    return dict(params.as_dict())


def forward(graph: Graph, params: AwareParams, config: AwareConfig) -> tuple[np.ndarray, ForwardTrace]:
    """Graph embedding ``f_[T]`` (length ``T * r_prime``) and the full trace."""
    F, F_seq, S_seq, levels, concat = _forward_vars(graph, _param_vars(params), config)
    trace = ForwardTrace(
        F=F.value,
        F_seq=[x.value for x in F_seq],
        S_seq=[x.value for x in S_seq],
        f_per_level=[x.value.ravel() for x in levels],
        f_concat=concat.value.ravel(),
    )
    return trace.f_concat, trace


def predict(f_concat, predictor: Sequence[tuple], config: AwareConfig) -> Var:
    """Fully connected head; input columns are graph embeddings."""
    h = f_concat
    hv = h.value if isinstance(h, Var) else np.asarray(h, dtype=float)
    if hv.ndim == 1:
        h = hv = hv[:, None]
    if hv.shape[0] != config.embedding_dim:
        raise ShapeError(f"predictor expects width {config.embedding_dim}, got {hv.shape[0]}")
    for k, (w, b) in enumerate(predictor):
        h = ad.add(ad.matmul(w, h), b)
        if k < len(predictor) - 1:
            h = ad.leaky_relu(h, config.head_alpha)
    return h


def loss(output, labels, task_kind: str) -> Var:
    """Mean loss over the columns of ``output``.

    Binary labels are given as {0, 1} (or {-1, +1}) and scored with the
    logistic loss on the logit; multiclass uses cross-entropy; regression the
    squared error.
    """
    labels = np.atleast_1d(np.asarray(labels, dtype=float))
    if task_kind == "binary-classification":
        if not np.isin(labels, (-1.0, 0.0, 1.0)).all():
            raise ContractError(f"binary labels must be 0/1 or -1/+1, got {np.unique(labels)}")
        return ad.logistic_loss(output, np.where(labels > 0, 1.0, -1.0))
    if task_kind == "multiclass-classification":
        if not np.all(labels == np.round(labels)):
            raise ContractError("multiclass labels must be integers")
        return ad.cross_entropy(output, labels.astype(int))
    if task_kind == "regression":
        return ad.squared_error(output, labels)
    raise ContractError(f"unknown task kind {task_kind!r}")


def graph_loss(graph: Graph, P: Mapping[str, Var | np.ndarray], config: AwareConfig) -> Var:
    """Loss of a single labelled graph, differentiable in ``P``."""
    *_, concat = _forward_vars(graph, P, config)
    layers = _layers_from(P)
    return loss(predict(concat, layers, config), [graph.label], config.task_kind)


def _layers_from(P: Mapping) -> list[tuple]:
    layers, k = [], 0
    while f"P{k}_w" in P:
        layers.append((P[f"P{k}_w"], P[f"P{k}_b"]))
        k += 1
    return layers


# ---------------------------------------------------------------------------
# batched path


@dataclass
class GraphBatch:
    """Disjoint union of several graphs on a directed edge list."""

    H: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    scatter: sp.csr_matrix
    pool: sp.csr_matrix
    labels: np.ndarray
    sizes: np.ndarray

    @property
    def num_vertices(self) -> int:
        return self.H.shape[1]

    @property
    def num_graphs(self) -> int:
        return len(self.sizes)

    @classmethod
    def from_graphs(cls, graphs: Sequence[Graph]) -> GraphBatch:
        Hs, srcs, dsts, sizes = [], [], [], []
        offset = 0
        for g in graphs:
            Hs.append(_onehot(g))
            s, d = np.nonzero(g.adjacency)
            srcs.append(s + offset)
            dsts.append(d + offset)
            sizes.append(g.vertex_count)
            offset += g.vertex_count
        src = np.concatenate(srcs).astype(np.intp) if srcs else np.zeros(0, np.intp)
        dst = np.concatenate(dsts).astype(np.intp) if dsts else np.zeros(0, np.intp)
        M, E, B = offset, len(src), len(graphs)
        scatter = sp.csr_matrix((np.ones(E), (np.arange(E), dst)), shape=(E, M))
        owner = np.repeat(np.arange(B), sizes)
        pool = sp.csr_matrix((np.ones(M), (np.arange(M), owner)), shape=(M, B))
        labels = np.asarray([g.label for g in graphs], dtype=float)
        return cls(np.hstack(Hs), src, dst, scatter, pool, labels, np.asarray(sizes))


def forward_batch(batch: GraphBatch, P: Mapping[str, Var | np.ndarray], config: AwareConfig) -> Var:
    """Embeddings of every graph in ``batch`` as the columns of a ``T r' x B`` matrix."""
    M = batch.num_vertices
    F = ad.matmul(P["W"], batch.H)
    F1 = initial_latent(F, P.get("W_v"), config)
    W_w, W_g = P.get("W_w"), P.get("W_g")
    weighted = config.use_ww and W_w is not None

    def pooled(X):
        pre = X if W_g is None else ad.matmul(W_g, X)
        return ad.matmul(ad.leaky_relu(pre, config.alpha), batch.pool)

    pair = None
    if weighted and config.score_mode == "pairwise":
        z = ad.column_dot(ad.take_columns(F1, batch.src), ad.take_columns(ad.matmul(W_w, F1), batch.dst))
        pair = ad.sigmoid(z)
    levels = [pooled(F1)]
    F_n = F1
    for _ in range(2, config.T + 1):
        msg = ad.take_columns(F_n, batch.src)
        if weighted:
            if pair is None:
                G = ad.take_columns(ad.matmul(W_w, F_n), batch.dst)
                S = ad.edge_softmax(ad.column_dot(msg, G), batch.dst, M)
            else:
                S = pair
            msg = ad.scale_columns(msg, S)
        F_n = ad.hadamard(ad.matmul(msg, batch.scatter), F1)
        levels.append(pooled(F_n))
    return ad.vstack(levels)


def batch_loss(batch: GraphBatch, P: Mapping[str, Var | np.ndarray], config: AwareConfig) -> Var:
    out = predict(forward_batch(batch, P, config), _layers_from(P), config)
    return loss(out, batch.labels, config.task_kind)


def batch_outputs(batch: GraphBatch, params: AwareParams, config: AwareConfig) -> np.ndarray:
    """Raw head outputs, shape ``output_dim x B``."""
    P = params.as_dict()
    return predict(forward_batch(batch, P, config), _layers_from(P), config).value


def embed_batch(batch: GraphBatch, params: AwareParams, config: AwareConfig) -> np.ndarray:
    return forward_batch(batch, params.as_dict(), config).value


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, params: AwareParams, config: AwareConfig, schema: AttributeSchema) -> None:
    """JSON header followed by little-endian float64 arrays in declaration order.

    Layout: 8-byte little-endian header length, UTF-8 JSON header, raw data.
    """
    arrays = params.as_dict()
    header = {
        "config": config.to_dict(),
        "schema": {"value_counts": list(schema.value_counts)},
        "shapes": [[name, list(a.shape)] for name, a in arrays.items()],
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[AwareParams, AwareConfig, AttributeSchema]:
    data = Path(path).read_bytes()
    (n,) = struct.unpack("<Q", data[:8])
    header = json.loads(data[8 : 8 + n])
    pos = 8 + n
    arrays = {}
    for name, shape in header["shapes"]:
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape(shape).copy()
        pos += 8 * count
    if pos != len(data):
        raise ShapeError(f"checkpoint has {len(data) - pos} trailing bytes")
    config = AwareConfig.from_dict(header["config"])
    schema = AttributeSchema(tuple(header["schema"]["value_counts"]))
    return AwareParams.from_dict(arrays), config, schema
