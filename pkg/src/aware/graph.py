"""Graph data model, dataset ingestion, featurization and splitting."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FormatError, IngestionError, SchemaError, SplitError

TASK_KINDS = ("binary-classification", "multiclass-classification", "regression")
DEFAULT_DEGREE_CAP = 64


@dataclass(frozen=True)
class AttributeSchema:
    """Value counts ``k_1..k_C`` of the C discrete vertex attributes."""

    value_counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(k) for k in self.value_counts)
        if not counts:
            raise SchemaError("schema needs at least one attribute")
        if any(k < 1 for k in counts):
            raise SchemaError(f"every attribute needs at least one value, got {counts}")
        object.__setattr__(self, "value_counts", counts)

    @property
    def attribute_count(self) -> int:
        return len(self.value_counts)

    @property
    def total_width(self) -> int:
        return sum(self.value_counts)

    @property
    def offsets(self) -> np.ndarray:
        """Row offset of each attribute block inside the concatenated one-hot."""
        return np.concatenate([[0], np.cumsum(self.value_counts)[:-1]]).astype(int)

    @property
    def combined_count(self) -> int:
        """Number of distinct attribute vectors, prod(k_j)."""
        return int(np.prod(self.value_counts))

    def validate(self, attrs: np.ndarray) -> None:
        attrs = np.asarray(attrs)
        if attrs.ndim != 2 or attrs.shape[1] != self.attribute_count:
            raise SchemaError(
                f"expected attributes of shape (m, {self.attribute_count}), got {attrs.shape}"
            )
        if attrs.size == 0:
            return
        if (attrs < 0).any():
            raise SchemaError("attribute values must be non-negative")
        limits = np.asarray(self.value_counts)
        bad = np.argwhere(attrs >= limits[None, :])
        if len(bad):
            i, j = bad[0]
            raise SchemaError(
                f"vertex {i} attribute {j} has value {attrs[i, j]} but only "
                f"{limits[j]} values are allowed"
            )


def one_hot(values, schema: AttributeSchema) -> np.ndarray:
    """Binary ``K x m`` matrix whose column i is the concatenated one-hot h_i."""
    values = np.asarray(values, dtype=int)
    if values.ndim == 1:
        values = values[:, None]
    schema.validate(values)
    m = values.shape[0]
    H = np.zeros((schema.total_width, m))
    rows = values + schema.offsets[None, :]
    H[rows.ravel(), np.repeat(np.arange(m), schema.attribute_count)] = 1.0
    return H


@dataclass(frozen=True, eq=False)
class Graph:
    """An undirected graph with discrete vertex attributes.

    ``attrs`` has shape ``(m, C)``; it is ``None`` for graphs loaded without
    vertex labels, which have to be featurized before use.
    """

    adjacency: np.ndarray
    attrs: np.ndarray | None = None
    label: float | int | None = None
    schema: AttributeSchema | None = None
    onehot: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        A = np.asarray(self.adjacency, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise FormatError(f"adjacency must be square, got shape {A.shape}")
        if not np.isin(A, (0.0, 1.0)).all():
            raise FormatError("adjacency entries must be 0 or 1")
        if not np.array_equal(A, A.T):
            raise FormatError("adjacency must be symmetric")
        if np.any(np.diag(A)):
            raise FormatError("adjacency must have a zero diagonal")
        A.setflags(write=False)
        object.__setattr__(self, "adjacency", A)
        if self.attrs is not None:
            attrs = np.asarray(self.attrs, dtype=int)
            if attrs.ndim == 1:
                attrs = attrs[:, None]
            if attrs.shape[0] != A.shape[0]:
                raise SchemaError(
                    f"{attrs.shape[0]} attribute rows for {A.shape[0]} vertices"
                )
            attrs.setflags(write=False)
            object.__setattr__(self, "attrs", attrs)
        if self.schema is not None and self.attrs is not None:
            if self.onehot is None:
                object.__setattr__(self, "onehot", one_hot(self.attrs, self.schema))
            else:
                self.schema.validate(self.attrs)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        same_attrs = (self.attrs is None and other.attrs is None) or (
            self.attrs is not None and other.attrs is not None and np.array_equal(self.attrs, other.attrs)
        )
        return (
            np.array_equal(self.adjacency, other.adjacency)
            and same_attrs
            and self.label == other.label
            and self.schema == other.schema
        )

    __hash__ = object.__hash__

    @property
    def vertex_count(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(int)

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.sum()) // 2

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges as ``(i, j)`` with ``i < j``."""
        iu, ju = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(iu.tolist(), ju.tolist()))

    def with_schema(self, schema: AttributeSchema) -> Graph:
        return replace(self, schema=schema, onehot=None)

    def permuted(self, perm: Sequence[int]) -> Graph:
        """Relabel vertices so that new vertex k is old vertex ``perm[k]``."""
        perm = np.asarray(perm)
        A = self.adjacency[np.ix_(perm, perm)]
        attrs = None if self.attrs is None else self.attrs[perm]
        return Graph(A, attrs, self.label, self.schema)


def graph_from_edges(n: int, edges, attrs=None, label=None, schema=None) -> Graph:
    """Build a graph from 0-based undirected edges; duplicates and self-loops are dropped."""
    A = np.zeros((n, n))
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise FormatError(f"edge ({i}, {j}) outside a graph with {n} vertices")
        if i != j:
            A[i, j] = A[j, i] = 1.0
    return Graph(A, attrs, label, schema)


@dataclass(frozen=True)
class Dataset:
    graphs: tuple[Graph, ...]
    schema: AttributeSchema | None
    task_kind: str
    name: str = ""

    def __post_init__(self):
        if self.task_kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.task_kind!r}")
        object.__setattr__(self, "graphs", tuple(self.graphs))
        for k, g in enumerate(self.graphs):
            if g.label is None:
                raise FormatError(f"graph {k} has no label")
            if self.schema is not None:
                if g.attrs is None:
                    raise SchemaError(f"graph {k} has no attributes")
                self.schema.validate(g.attrs)

    def __len__(self) -> int:
        return len(self.graphs)

    def __getitem__(self, k):
        return self.graphs[k]

    @property
    def featurized(self) -> bool:
        return self.schema is not None

    @property
    def labels(self) -> np.ndarray:
        return np.asarray([g.label for g in self.graphs])

    @property
    def num_classes(self) -> int:
        if self.task_kind == "regression":
            return 0
        return int(self.labels.max()) + 1

    def subset(self, idx) -> Dataset:
        return replace(self, graphs=tuple(self.graphs[i] for i in idx))


def degree_featurize(graph: Graph, cap: int = DEFAULT_DEGREE_CAP) -> Graph:
    """Use the vertex degree, clamped at ``cap``, as the single vertex attribute."""
    if cap < 1:
        raise ValueError("degree cap must be at least 1")
    schema = AttributeSchema((cap + 1,))
    attrs = np.minimum(graph.degrees, cap)[:, None]
    return Graph(graph.adjacency, attrs, graph.label, schema)


def degree_featurize_dataset(dataset: Dataset, cap: int = DEFAULT_DEGREE_CAP) -> Dataset:
    graphs = tuple(degree_featurize(g, cap) for g in dataset.graphs)
    return replace(dataset, graphs=graphs, schema=AttributeSchema((cap + 1,)))


# ---------------------------------------------------------------------------
# TUDataset plain-text format


def _read_ints(path: Path, ncols: int | None = None) -> list[list[int]]:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [int(float(tok)) for tok in line.split(",")]
            except ValueError:
                raise FormatError(f"{path.name}: cannot parse {line!r}", lineno) from None
            if ncols is not None and len(row) != ncols:
                raise FormatError(f"{path.name}: expected {ncols} values, got {len(row)}", lineno)
            rows.append(row)
    return rows


def _require(directory: Path, name: str, suffix: str) -> Path:
    path = directory / f"{name}_{suffix}.txt"
    if not path.is_file():
        raise IngestionError(f"missing required file {path.name} in {directory}")
    return path


def load_tudataset(directory, name: str) -> Dataset:
    """Read a TUDataset directory (``<name>_A.txt`` etc.).

    Edges are symmetrized and deduplicated, self-loops are dropped, graph
    labels are remapped to contiguous 0-based classes. Without
    ``<name>_node_labels.txt`` the graphs carry no attributes.
    """
    directory = Path(directory)
    a_path = _require(directory, name, "A")
    ind_path = _require(directory, name, "graph_indicator")
    lab_path = _require(directory, name, "graph_labels")

    indicator = np.asarray([r[0] for r in _read_ints(ind_path, 1)], dtype=int)
    raw_labels = [r[0] for r in _read_ints(lab_path, 1)]
    n_nodes = len(indicator)
    if n_nodes == 0:
        raise FormatError(f"{ind_path.name} is empty")
    gids = np.unique(indicator)
    if len(gids) != len(raw_labels):
        raise FormatError(
            f"{len(gids)} graphs in {ind_path.name} but {len(raw_labels)} labels in {lab_path.name}"
        )
    if np.any(np.diff(indicator) < 0):
        raise FormatError(f"{ind_path.name}: vertices are not grouped by graph")
    gpos = np.searchsorted(gids, indicator)
    starts = np.searchsorted(indicator, gids)
    sizes = np.diff(np.append(starts, n_nodes))

    adjs = [np.zeros((s, s)) for s in sizes]
    with open(a_path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                u, v = (int(tok) for tok in line.split(","))
            except ValueError:
                raise FormatError(f"{a_path.name}: cannot parse edge {line!r}", lineno) from None
            if not (1 <= u <= n_nodes and 1 <= v <= n_nodes):
                raise FormatError(f"{a_path.name}: vertex out of range in edge {line!r}", lineno)
            gu, gv = gpos[u - 1], gpos[v - 1]
            if gu != gv:
                raise FormatError(
                    f"{a_path.name}: edge ({u}, {v}) joins graph {gids[gu]} and graph {gids[gv]}",
                    lineno,
                )
            if u == v:
                continue
            i, j = u - 1 - starts[gu], v - 1 - starts[gu]
            adjs[gu][i, j] = adjs[gu][j, i] = 1.0

    classes = sorted(set(raw_labels))
    remap = {c: k for k, c in enumerate(classes)}
    task = "binary-classification" if len(classes) <= 2 else "multiclass-classification"

    node_path = directory / f"{name}_node_labels.txt"
    schema = None
    node_attrs = None
    if node_path.is_file():
        node_labels = np.asarray(_read_ints(node_path), dtype=int)
        if len(node_labels) != n_nodes:
            raise FormatError(f"{node_path.name} has {len(node_labels)} rows for {n_nodes} vertices")
        node_labels = node_labels[:, :1]
        if (node_labels < 0).any():
            raise FormatError(f"{node_path.name}: negative vertex label")
        schema = AttributeSchema((int(node_labels.max()) + 1,))
        node_attrs = node_labels

    graphs = []
    for k in range(len(gids)):
        attrs = None
        if node_attrs is not None:
            attrs = node_attrs[starts[k] : starts[k] + sizes[k]]
        graphs.append(Graph(adjs[k], attrs, remap[raw_labels[k]], schema))
    return Dataset(tuple(graphs), schema, task, name)


def save_tudataset(dataset: Dataset, directory, name: str) -> None:
    """Write ``dataset`` in TUDataset format (both edge directions, 1-based)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    offset = 0
    with open(directory / f"{name}_A.txt", "w") as fa, open(
        directory / f"{name}_graph_indicator.txt", "w"
    ) as fi, open(directory / f"{name}_graph_labels.txt", "w") as fl:
        for k, g in enumerate(dataset.graphs, start=1):
            for i, j in zip(*np.nonzero(g.adjacency)):
                fa.write(f"{offset + i + 1}, {offset + j + 1}\n")
            fi.writelines(f"{k}\n" for _ in range(g.vertex_count))
            fl.write(f"{int(g.label)}\n")
            offset += g.vertex_count
    if dataset.featurized and dataset.schema.attribute_count == 1:
        with open(directory / f"{name}_node_labels.txt", "w") as fn:
            for g in dataset.graphs:
                fn.writelines(f"{int(a)}\n" for a in g.attrs[:, 0])


# ---------------------------------------------------------------------------
# JSON graph format


def load_json_dataset(path, task_kind: str | None = None) -> Dataset:
    """Read the pre-featurized JSON format.

    ``{"schema": {"value_counts": [...]}, "graphs": [{"n", "edges", "attrs", "label"}]}``
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise IngestionError(f"missing file {path}") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path.name}: invalid JSON ({exc.msg})", exc.lineno) from None
    try:
        schema = AttributeSchema(tuple(doc["schema"]["value_counts"]))
        entries = doc["graphs"]
    except (KeyError, TypeError):
        raise FormatError(f"{path.name}: expected keys 'schema.value_counts' and 'graphs'") from None
    graphs = []
    for k, entry in enumerate(entries):
        try:
            n = int(entry["n"])
            g = graph_from_edges(n, entry.get("edges", []), np.asarray(entry["attrs"]).reshape(n, -1),
                                 entry["label"], schema)
        except KeyError as exc:
            raise FormatError(f"{path.name}: graph {k} lacks {exc}") from None
        graphs.append(g)
    labels = [g.label for g in graphs]
    if task_kind is None:
        task_kind = doc.get("task_kind")
    if task_kind is None:
        if all(float(y).is_integer() for y in labels):
            task_kind = "binary-classification" if len(set(labels)) <= 2 else "multiclass-classification"
        else:
            task_kind = "regression"
    if task_kind != "regression":
        graphs = [replace(g, label=int(g.label)) for g in graphs]
    return Dataset(tuple(graphs), schema, task_kind, path.stem)


def save_json_dataset(dataset: Dataset, path) -> None:
    if not dataset.featurized:
        raise SchemaError("only featurized datasets can be written as JSON")
    doc = {
        "schema": {"value_counts": list(dataset.schema.value_counts)},
        "task_kind": dataset.task_kind,
        "graphs": [
            {
                "n": g.vertex_count,
                "edges": [list(e) for e in g.edges()],
                "attrs": g.attrs.tolist(),
                "label": g.label.item() if hasattr(g.label, "item") else g.label,
            }
            for g in dataset.graphs
        ],
    }
    Path(path).write_text(json.dumps(doc))


# ---------------------------------------------------------------------------
# Splits


@dataclass(frozen=True)
class SplitSpec:
    train_idx: tuple[int, ...]
    val_idx: tuple[int, ...]
    test_idx: tuple[int, ...]
    seed: int

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train_idx), len(self.val_idx), len(self.test_idx)


def split_dataset(dataset, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> SplitSpec:
    """Seeded shuffle followed by contiguous slicing into train/val/test.

    Sizes are ``floor(r_train N)``, ``floor(r_val N)`` and the remainder.
    ``dataset`` may also be the dataset size as an integer.
    """
    n = dataset if isinstance(dataset, int) else len(dataset)
    if n < 3:
        raise SplitError(f"need at least 3 graphs to split, got {n}")
    if len(ratios) != 3 or any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0):
        raise SplitError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(math.floor(ratios[0] * n + 1e-9))
    n_val = int(math.floor(ratios[1] * n + 1e-9))
    return SplitSpec(
        tuple(perm[:n_train].tolist()),
        tuple(perm[n_train : n_train + n_val].tolist()),
        tuple(perm[n_train + n_val :].tolist()),
        seed,
    )


def resolve_data_dir(path: str | os.PathLike | None) -> Path:
    """Return ``path`` or the ``AWARE_DATA_DIR`` fallback."""
    if path:
        return Path(path)
    env = os.environ.get("AWARE_DATA_DIR")
    if not env:
        raise IngestionError("no data directory given and AWARE_DATA_DIR is unset")
    return Path(env)


DATASET_ALIASES = {"imdb-b": "IMDB-BINARY", "imdb-binary": "IMDB-BINARY"}


def find_tudataset(name: str, data_dir=None) -> tuple[Path, str]:
    """Locate a TUDataset by directory path or by name under the data root.

    ``name`` may be a directory holding ``<NAME>_A.txt``, or a dataset name
    (aliases such as ``imdb-b`` are accepted) looked up as ``<root>/<NAME>``
    or directly in ``<root>``, where the root is ``data_dir`` or
    ``AWARE_DATA_DIR``.
    """
    p = Path(name)
    if p.is_dir():
        hits = sorted(p.glob("*_A.txt"))
        if len(hits) != 1:
            raise IngestionError(f"expected exactly one *_A.txt file in {p}, found {len(hits)}")
        return p, hits[0].name[: -len("_A.txt")]
    canonical = DATASET_ALIASES.get(name.lower(), name)
    root = resolve_data_dir(data_dir)
    for candidate in (root / canonical, root):
        if (candidate / f"{canonical}_A.txt").is_file():
            return candidate, canonical
    raise IngestionError(f"dataset {canonical} not found under {root} (looked for {canonical}_A.txt)")
