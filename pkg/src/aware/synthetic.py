"""Synthetic graphs and datasets with known ground truth."""

from __future__ import annotations

import numpy as np

from .graph import AttributeSchema, Dataset, Graph, graph_from_edges
from .walks import walk_statistics


def random_graph(rng: np.random.Generator, m: int, p: float, schema: AttributeSchema,
                 label=None) -> Graph:
    """Erdos-Renyi graph with uniformly random attribute values."""
    upper = np.triu(rng.random((m, m)) < p, 1)
    A = (upper | upper.T).astype(float)
    attrs = np.column_stack([rng.integers(0, k, size=m) for k in schema.value_counts])
    return Graph(A, attrs, label, schema)


def random_connected_graph(rng: np.random.Generator, m: int, extra_edges: int,
                           schema: AttributeSchema, label=None) -> Graph:
    """Random tree plus ``extra_edges`` random chords."""
    edges = {(int(rng.integers(0, i)), i) for i in range(1, m)}
    for _ in range(extra_edges):
        i, j = rng.choice(m, size=2, replace=False)
        edges.add((int(min(i, j)), int(max(i, j))))
    attrs = np.column_stack([rng.integers(0, k, size=m) for k in schema.value_counts])
    return graph_from_edges(m, sorted(edges), attrs, label, schema)


def walk_twin_graphs() -> tuple[Graph, Graph]:
    """Two non-isomorphic 8-vertex trees with equal walk statistics up to length 3.

    Both are a 7-vertex path of B vertices (value 1) with one pendant A vertex
    (value 0, index 1). In (a) the pendant hangs off the middle of the path, in
    (b) off a neighbour of the middle. Degree multisets coincide.
    """
    schema = AttributeSchema((2,))
    attrs = [1, 0, 1, 1, 1, 1, 1, 1]
    spine = [(0, 2), (2, 3), (3, 4), (0, 5), (5, 6), (6, 7)]
    a = graph_from_edges(8, spine + [(0, 1)], attrs, None, schema)
    b = graph_from_edges(8, spine + [(5, 1)], attrs, None, schema)
    return a, b


MOTIF_VALUE = 3


def _induced_path(rng: np.random.Generator, A: np.ndarray, length: int, tries: int = 200):
    """Random simple path of ``length`` vertices whose induced subgraph is exactly the path."""
    m = A.shape[0]
    for _ in range(tries):
        path = [int(rng.integers(m))]
        while len(path) < length:
            options = [j for j in np.flatnonzero(A[path[-1]]) if j not in path]
            if not options:
                break
            path.append(int(rng.choice(options)))
        if len(path) == length and A[np.ix_(path, path)].sum() == 2 * (length - 1):
            return path
    return None


def _independent_set(rng: np.random.Generator, A: np.ndarray, size: int):
    chosen: list[int] = []
    for v in rng.permutation(A.shape[0]):
        if all(A[v, u] == 0 for u in chosen):
            chosen.append(int(v))
        if len(chosen) == size:
            return chosen
    return None


def random_ring_graph(rng: np.random.Generator, m: int, extra_edges: int,
                      schema: AttributeSchema, label=None) -> Graph:
    """Cycle through a random vertex order plus ``extra_edges`` random chords."""
    order = rng.permutation(m)
    edges = {(int(min(u, v)), int(max(u, v))) for u, v in zip(order, np.roll(order, -1))}
    while len(edges) < m + extra_edges:
        i, j = rng.choice(m, size=2, replace=False)
        edges.add((int(min(i, j)), int(max(i, j))))
    attrs = np.column_stack([rng.integers(0, k, size=m) for k in schema.value_counts])
    return graph_from_edges(m, sorted(edges), attrs, label, schema)


def planted_motif_graph(rng: np.random.Generator, m: int, positive: bool,
                        schema: AttributeSchema, extra_edges: int = 2) -> tuple[Graph, list[tuple[int, int]]]:
    """Random ring-with-chords background with four special vertices.

    Background vertices never take ``MOTIF_VALUE``. In a positive graph the
    four special vertices sit on an induced 3-edge path of the background (the
    motif); in a negative graph they are pairwise non-adjacent. Both classes
    have the same vertex attribute counts and the motif adds no edges, so only
    special-special adjacency separates them. Returns the graph and its motif
    edges.
    """
    while True:
        base = random_ring_graph(rng, m, extra_edges, schema)
        A = base.adjacency
        special = _induced_path(rng, A, 4) if positive else _independent_set(rng, A, 4)
        if special is not None:
            break
    attrs = rng.integers(0, MOTIF_VALUE, size=(m, 1))
    attrs[special] = MOTIF_VALUE
    motif = []
    if positive:
        motif = sorted((min(u, v), max(u, v)) for u, v in zip(special, special[1:]))
    return Graph(A, attrs, int(positive), schema), motif


def planted_motif_dataset(n_graphs: int, seed: int = 0, m_range=(10, 16)) -> tuple[Dataset, list]:
    """Balanced planted-motif dataset; also returns each graph's motif edges."""
    rng = np.random.default_rng(seed)
    schema = AttributeSchema((MOTIF_VALUE + 1,))
    graphs, motifs = [], []
    for k in range(n_graphs):
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        g, motif = planted_motif_graph(rng, m, positive=k % 2 == 0, schema=schema)
        graphs.append(g)
        motifs.append(motif)
    return Dataset(tuple(graphs), schema, "binary-classification", "planted-motif"), motifs


def walk_count_dataset(n_graphs: int, seed: int = 0, K: int = 3, n: int = 2,
                       target=(0, 1), m_range=(6, 12), p: float = 0.3,
                       regression: bool = False) -> Dataset:
    """Labels from a planted walk-type count ``c_(n)[target]``.

    For classification the label is 1 iff the count exceeds its median; for
    regression it is the count standardized over the dataset.
    """
    rng = np.random.default_rng(seed)
    schema = AttributeSchema((K,))
    raw = []
    for _ in range(n_graphs):
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        raw.append(random_graph(rng, m, p, schema))
    key = tuple((v,) for v in target)
    scores = np.asarray([walk_statistics(g, n).counts.get(key, 0) for g in raw], dtype=float)
    if regression:
        labels = (scores - scores.mean()) / max(scores.std(), 1e-12)
        task = "regression"
    else:
        labels = (scores > np.median(scores)).astype(int)
        task = "binary-classification"
    graphs = [Graph(g.adjacency, g.attrs, y.item(), schema) for g, y in zip(raw, labels)]
    return Dataset(tuple(graphs), schema, task, "walk-count")
