"""Brute-force walk enumeration and the representation identities it certifies.

Everything here is desk-scale on purpose: walks are listed one by one, so the
results are independent of the matrix recursions in :mod:`aware.model`.
"""

from __future__ import annotations

import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass, replace

import numpy as np

from .errors import BudgetError, ContractError
from .graph import AttributeSchema, Graph
from .model import AwareConfig, AwareParams, forward

DEFAULT_BUDGET = 10**6

WalkType = tuple[tuple[int, ...], ...]


def walk_count(graph: Graph, n: int) -> int:
    """Number of walks with n vertices, ``1^T A^(n-1) 1``."""
    A = graph.adjacency.astype(np.int64)
    v = np.ones(graph.vertex_count, dtype=np.int64)
    for _ in range(n - 1):
        v = A @ v
    return int(v.sum())


def enumerate_walks(graph: Graph, n: int, budget: int = DEFAULT_BUDGET) -> list[tuple[int, ...]]:
    """All walks with ``n`` vertices in lexicographic order; revisits allowed."""
    if n < 1:
        raise ContractError("walk length must be at least 1")
    total = walk_count(graph, n)
    if total * n > budget:
        raise BudgetError(f"{total} walks of length {n} exceed the budget of {budget} vertex visits")
    nbrs = [graph.neighbors(i).tolist() for i in range(graph.vertex_count)]
    out: list[tuple[int, ...]] = []

    def extend(prefix):
        if len(prefix) == n:
            out.append(tuple(prefix))
            return
        for j in nbrs[prefix[-1]]:
            prefix.append(j)
            extend(prefix)
            prefix.pop()

    for i in range(graph.vertex_count):
        extend([i])
    return out


@dataclass
class WalkStatistics:
    n: int
    counts: dict[WalkType, int]
    per_vertex: dict[int, dict[WalkType, int]] | None = None

    def total(self) -> int:
        return sum(self.counts.values())

    def vector(self, schema: AttributeSchema, vertex: int | None = None) -> np.ndarray:
        """Dense histogram indexed like the columns of :func:`column_product`."""
        source = self.counts if vertex is None else self.per_vertex.get(vertex, {})
        c = np.zeros(schema.combined_count**self.n)
        for v, k in source.items():
            c[walk_type_index(v, schema)] += k
        return c


def walk_statistics(graph: Graph, n: int, per_vertex: bool = False,
                    budget: int = DEFAULT_BUDGET) -> WalkStatistics:
    if graph.attrs is None:
        raise ContractError("walk statistics need vertex attributes")
    labels = [tuple(int(a) for a in row) for row in graph.attrs]
    counts: Counter = Counter()
    starts: dict[int, Counter] = defaultdict(Counter)
    for walk in enumerate_walks(graph, n, budget):
        v = tuple(labels[k] for k in walk)
        counts[v] += 1
        if per_vertex:
            starts[walk[0]][v] += 1
    pv = {i: dict(c) for i, c in starts.items()} if per_vertex else None
    return WalkStatistics(n, dict(counts), pv)


# ---------------------------------------------------------------------------
# walk types and column products


def attribute_vectors(schema: AttributeSchema) -> list[tuple[int, ...]]:
    """All attribute vectors in lexicographic order."""
    return list(itertools.product(*(range(k) for k in schema.value_counts)))


def _vector_index(u, schema: AttributeSchema) -> int:
    idx = 0
    for value, k in zip(u, schema.value_counts):
        idx = idx * k + int(value)
    return idx


def walk_type_index(v: WalkType, schema: AttributeSchema) -> int:
    base = schema.combined_count
    idx = 0
    for u in v:
        idx = idx * base + _vector_index(u, schema)
    return idx


def walk_types(schema: AttributeSchema, n: int) -> list[WalkType]:
    return list(itertools.product(attribute_vectors(schema), repeat=n))


def value_table(W: np.ndarray, schema: AttributeSchema) -> np.ndarray:
    """Column u is the embedding ``W h(u)`` of attribute vector u."""
    H = np.zeros((schema.total_width, schema.combined_count))
    offsets = schema.offsets
    for col, u in enumerate(attribute_vectors(schema)):
        H[offsets + np.asarray(u), col] = 1.0
    return W @ H


def column_product(table: np.ndarray, n: int, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """n-way column product: column ``(v_1..v_n)`` is ``table[:, v_1] * ... * table[:, v_n]``.

    Columns are in lexicographic order of the index tuple.
    """
    r, K = table.shape
    if K**n > budget:
        raise BudgetError(f"{K}^{n} columns exceed the budget of {budget}")
    out = table
    for _ in range(n - 1):
        out = (out[:, :, None] * table[:, None, :]).reshape(r, -1)
    return out


def gated_table(W: np.ndarray, W_v: np.ndarray | None, alpha: float, schema: AttributeSchema) -> np.ndarray:
    """Columns ``Gamma(z) z`` with ``z = W_v W(u)``; Gamma picks slope alpha below zero."""
    z = value_table(W, schema)
    if W_v is not None:
        z = W_v @ z
    gamma = np.where(z < 0, alpha, 1.0)
    return gamma * z


def general_column_product(W, W_v, alpha: float, schema: AttributeSchema, n: int,
                           budget: int = DEFAULT_BUDGET) -> np.ndarray:
    return column_product(gated_table(W, W_v, alpha, schema), n, budget)


# ---------------------------------------------------------------------------
# walk weights


def _logistic(x: float) -> float:
    return 1.0 / (1.0 + np.exp(-x)) if x >= 0 else np.exp(x) / (1.0 + np.exp(x))


def latent_embedding(u, params: AwareParams, config: AwareConfig, schema: AttributeSchema) -> np.ndarray:
    """Latent vector of a vertex whose attribute vector is ``u``."""
    h = np.zeros(schema.total_width)
    h[schema.offsets + np.asarray(u)] = 1.0
    z = params.W @ h
    if params.W_v is not None:
        z = params.W_v @ z
    return np.where(z >= 0, z, config.alpha * z)


def walk_weight(v: WalkType, params: AwareParams, config: AwareConfig, schema: AttributeSchema) -> float:
    """Product of pairwise scores along a walk type.

    The factor for a step from ``v_k`` to ``v_{k+1}`` is
    ``logistic(e(v_{k+1})^T W_w e(v_k))``; without W_w every factor is 1.
    """
    if not config.use_ww or params.W_w is None:
        return 1.0
    if config.score_mode != "pairwise":
        raise ContractError("walk weights are defined for pairwise scores only")
    embs = [latent_embedding(u, params, config, schema) for u in v]
    lam = 1.0
    for cur, nxt in zip(embs, embs[1:]):
        lam *= _logistic(float(nxt @ params.W_w @ cur))
    return lam


def weight_table(types, params, config, schema) -> dict[WalkType, float]:
    return {v: walk_weight(v, params, config, schema) for v in types}


def weighted_vector(stats: WalkStatistics, params, config, schema, vertex: int | None = None) -> np.ndarray:
    """Dense ``Lambda c`` (or ``Lambda c^i`` for a vertex)."""
    source = stats.counts if vertex is None else stats.per_vertex.get(vertex, {})
    out = np.zeros(schema.combined_count**stats.n)
    for v, k in source.items():
        out[walk_type_index(v, schema)] += walk_weight(v, params, config, schema) * k
    return out


# ---------------------------------------------------------------------------
# references and identity checks


def ngram_reference(graph: Graph, W: np.ndarray, n: int, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """Sum over all n-vertex walks of the entrywise product of vertex embeddings."""
    F = W @ graph.onehot
    out = np.zeros(F.shape[0])
    for walk in enumerate_walks(graph, n, budget):
        out += np.prod(F[:, list(walk)], axis=1)
    return out


def ngram_recursion(graph: Graph, W: np.ndarray, T: int) -> list[np.ndarray]:
    """Unweighted message-passing form: ``F_n = (F_{n-1} A) * F``, ``f_n = F_n 1``."""
    F = W @ graph.onehot
    A = graph.adjacency
    F_n = F
    out = [F_n.sum(axis=1)]
    for _ in range(2, T + 1):
        F_n = (F_n @ A) * F
        out.append(F_n.sum(axis=1))
    return out


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(1e-12, np.linalg.norm(a)))


def _theory_mode(config: AwareConfig) -> None:
    if config.use_ww and config.score_mode != "pairwise":
        raise ContractError("the walk identities hold for pairwise scores (or no W_w) only")


def _model_config(config: AwareConfig, n: int) -> AwareConfig:
    return config if config.T >= n else replace(config, T=n)


def verify_walk_identity(graph: Graph, params: AwareParams, config: AwareConfig, n: int,
                    budget: int = DEFAULT_BUDGET) -> float:
    """Relative residual between ``f_(n)`` and ``W^[n] Lambda_(n) c_(n)``."""
    _theory_mode(config)
    schema = graph.schema
    if config.use_wv or config.use_wg or config.alpha != 1.0 or schema.attribute_count != 1:
        raise ContractError("needs the simplified setting: no W_v, no W_g, linear activation, C = 1")
    _, trace = forward(graph, params, _model_config(config, n))
    f_n = trace.f_per_level[n - 1]
    stats = walk_statistics(graph, n, budget=budget)
    rhs = column_product(params.W, n, budget) @ weighted_vector(stats, params, config, schema)
    return _rel(f_n, rhs)


def verify_vertex_expansion(graph: Graph, params: AwareParams, config: AwareConfig, n: int,
                  budget: int = DEFAULT_BUDGET) -> float:
    """Largest per-vertex relative residual of the walk expansion of ``F_(n)``."""
    _theory_mode(config)
    schema = graph.schema
    _, trace = forward(graph, params, _model_config(config, n))
    F1, Fn = trace.F_seq[0], trace.F_seq[n - 1]
    labels = [tuple(int(a) for a in row) for row in graph.attrs]
    expected = np.zeros_like(Fn)
    cache: dict[WalkType, float] = {}
    for walk in enumerate_walks(graph, n, budget):
        v = tuple(labels[k] for k in walk)
        if v not in cache:
            cache[v] = walk_weight(v, params, config, schema)
        expected[:, walk[0]] += cache[v] * np.prod(F1[:, list(walk)], axis=1)
    return max((_rel(Fn[:, i], expected[:, i]) for i in range(graph.vertex_count)), default=0.0)


def verify_general_identity(graph: Graph, params: AwareParams, config: AwareConfig, n: int,
                    budget: int = DEFAULT_BUDGET) -> float:
    """Per-vertex check of ``[W_g F_(n)]_i = W_g (W_v W)^{n} Lambda_(n) c^i_(n)``.

    Also checks ``f_(n) = sum_i sigma([W_g F_(n)]_i)``; returns the worst
    relative residual of all these comparisons.
    """
    _theory_mode(config)
    schema = graph.schema
    _, trace = forward(graph, params, _model_config(config, n))
    Fn = trace.F_seq[n - 1]
    W_g = params.W_g if params.W_g is not None else np.eye(Fn.shape[0])
    lhs = W_g @ Fn
    M = W_g @ general_column_product(params.W, params.W_v, config.alpha, schema, n, budget)
    stats = walk_statistics(graph, n, per_vertex=True, budget=budget)
    worst = 0.0
    for i in range(graph.vertex_count):
        rhs = M @ weighted_vector(stats, params, config, schema, vertex=i)
        worst = max(worst, _rel(lhs[:, i], rhs))
    activated = np.where(lhs >= 0, lhs, config.alpha * lhs).sum(axis=1)
    worst = max(worst, _rel(trace.f_per_level[n - 1], activated))
    return worst
