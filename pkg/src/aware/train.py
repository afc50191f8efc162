"""Mini-batch training with early stopping, seed sweeps and the ablation matrix."""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .errors import ContractError, MetricError, NonFiniteError
from .graph import Dataset, Graph, SplitSpec, split_dataset
from .metrics import check_metric, improved, score
from .model import AwareConfig, AwareParams, GraphBatch, batch_loss, batch_outputs, init_params

EVAL_CHUNK = 256

GRID = {
    "T": (3, 6, 9, 12),
    "r": (100, 300, 500),
    "r_prime": (100, 300, 500),
    "L": (1, 2, 3),
    "lr": (1e-3, 1e-4),
}


@dataclass(frozen=True)
class TrainConfig:
    aware: AwareConfig = field(default_factory=AwareConfig)
    lr: float = 1e-3
    epochs: int = 500
    patience: int = 50
    batch_size: int = 32
    seeds: tuple[int, ...] = (0,)
    metric: str = "ACC"

    def __post_init__(self):
        if self.lr < 0:
            raise ContractError("learning rate must be non-negative")
        if self.epochs < 1 or self.patience < 1 or self.batch_size < 1:
            raise ContractError("epochs, patience and batch_size must be positive")
        if self.patience > self.epochs:
            raise ContractError("patience cannot exceed epochs")
        if not self.seeds:
            raise ContractError("need at least one seed")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        check_metric(self.metric, self.aware.task_kind)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> TrainConfig:
        """Flat or nested dict; model keys may sit at top level or under ``aware``."""
        model_keys = {f for f in AwareConfig.__dataclass_fields__}
        train_keys = set(cls.__dataclass_fields__) - {"aware"}
        aware = dict(d.get("aware", {}))
        own = {}
        unknown = []
        for k, v in d.items():
            if k == "aware":
                continue
            if k in train_keys:
                own[k] = tuple(v) if k == "seeds" else v
            elif k in model_keys:
                aware[k] = v
            else:
                unknown.append(k)
        if unknown:
            raise ContractError(f"unknown config keys: {sorted(unknown)}")
        return cls(aware=AwareConfig.from_dict(aware), **own)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class SeedRecord:
    seed: int
    best_epoch: int
    val_metric: float
    test_metric: float
    train_metric: float
    epochs_run: int
    history: list[dict] = field(default_factory=list)
    params: AwareParams | None = field(default=None, repr=False)
    final_params: AwareParams | None = field(default=None, repr=False)

    def to_dict(self, with_history: bool = False) -> dict:
        d = {k: getattr(self, k) for k in ("seed", "best_epoch", "val_metric", "test_metric",
                                            "train_metric", "epochs_run")}
        if with_history:
            d["history"] = self.history
        return d


@dataclass
class RunResult:
    metric: str
    records: list[SeedRecord]
    mean: float
    std: float
    config_hash: str = ""
    wall_clock: float = 0.0

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "metric": self.metric,
            "per_seed": [r.to_dict() for r in self.records],
            "mean": self.mean,
            "std": self.std,
            "wall_clock": self.wall_clock,
        }


def _chunks(graphs: Sequence[Graph], size: int):
    for k in range(0, len(graphs), size):
        yield graphs[k : k + size]


def predict_outputs(params: AwareParams, config: AwareConfig, graphs: Sequence[Graph]) -> np.ndarray:
    """Raw head outputs for ``graphs``, one column per graph."""
    outs = [batch_outputs(GraphBatch.from_graphs(chunk), params, config)
            for chunk in _chunks(list(graphs), EVAL_CHUNK)]
    if not outs:
        return np.zeros((config.output_dim, 0))
    return np.hstack(outs)


def evaluate(params: AwareParams, config: AwareConfig, graphs: Sequence[Graph], metric: str) -> float:
    check_metric(metric, config.task_kind)
    if not graphs:
        raise MetricError("cannot evaluate on an empty graph set")
    labels = np.asarray([g.label for g in graphs], dtype=float)
    return score(metric, predict_outputs(params, config, graphs), labels, config.task_kind)


def _aware_for(dataset: Dataset, aware: AwareConfig) -> AwareConfig:
    if dataset.task_kind != aware.task_kind:
        aware = replace(aware, task_kind=dataset.task_kind)
    if dataset.task_kind == "multiclass-classification" and aware.num_classes != dataset.num_classes:
        aware = replace(aware, num_classes=dataset.num_classes)
    return aware


def train(dataset: Dataset, split: SplitSpec, config: TrainConfig, seed: int,
          track_train: bool = False) -> SeedRecord:
    """Adam on the mean batch loss with early stopping on the validation metric.

    Epochs are numbered from 1. Training stops once ``patience`` epochs pass
    without a strict improvement, and the returned parameters are those of the
    best validation epoch. With ``track_train`` the history also records the
    training-set metric of every epoch.
    """
    if not dataset.featurized:
        raise ContractError("dataset has no vertex attributes; featurize it first")
    aware = _aware_for(dataset, config.aware)
    check_metric(config.metric, aware.task_kind)
    graphs = dataset.graphs
    train_g = [graphs[i] for i in split.train_idx]
    val_g = [graphs[i] for i in split.val_idx]
    test_g = [graphs[i] for i in split.test_idx]

    params = init_params(aware, dataset.schema, seed)
    trainable = params.trainable_names(aware)
    values = params.as_dict()
    state = ad.AdamState(lr=config.lr)
    rng = np.random.default_rng([seed, 1])

    best_val, best_epoch, best_values = None, 0, {k: v.copy() for k, v in values.items()}
    history: list[dict] = []
    stale = 0
    epoch = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_g))
        losses = []
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            batch = GraphBatch.from_graphs([train_g[i] for i in order[start : start + config.batch_size]])
            tape = ad.Tape()
            P = {k: tape.param(k, v) if k in trainable else v for k, v in values.items()}
            try:
                L = batch_loss(batch, P, aware)
            except NonFiniteError as exc:
                raise NonFiniteError(f"epoch {epoch}, batch {b}: {exc}") from None
            lv = float(L.value.reshape(-1)[0])
            if not np.isfinite(lv):
                raise NonFiniteError(f"epoch {epoch}, batch {b}: loss is {lv}")
            grads = ad.backward(L, tape)
            updated, state = ad.adam_step({k: values[k] for k in trainable}, grads, state)
            values.update(updated)
            losses.append(lv)
        current = AwareParams.from_dict(values)
        val = evaluate(current, aware, val_g, config.metric)
        history.append({"epoch": epoch, "train_loss": float(np.mean(losses)), "val_metric": val})
        if track_train:
            history[-1]["train_metric"] = evaluate(current, aware, train_g, config.metric)
        if improved(config.metric, val, best_val):
            best_val, best_epoch, stale = val, epoch, 0
            best_values = {k: v.copy() for k, v in values.items()}
        else:
            stale += 1
            if stale >= config.patience:
                break

    best = AwareParams.from_dict(best_values)
    return SeedRecord(
        seed=seed,
        best_epoch=best_epoch,
        val_metric=float(best_val),
        test_metric=evaluate(best, aware, test_g, config.metric),
        train_metric=evaluate(best, aware, train_g, config.metric),
        epochs_run=epoch,
        history=history,
        params=best,
        final_params=AwareParams.from_dict(values),
    )


def aggregate(metric: str, records: list[SeedRecord], config_hash: str = "", wall_clock: float = 0.0) -> RunResult:
    vals = np.asarray([r.test_metric for r in records])
    std = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    return RunResult(metric, records, float(vals.mean()), std, config_hash, wall_clock)


def seed_sweep(dataset: Dataset, config: TrainConfig, ratios=(0.8, 0.1, 0.1)) -> RunResult:
    """Fresh split, initialization and training for every seed."""
    start = time.perf_counter()
    records = [train(dataset, split_dataset(dataset, ratios, seed), config, seed) for seed in config.seeds]
    return aggregate(config.metric, records, config.config_hash(), time.perf_counter() - start)


ABLATIONS = (
    ("base", {}),
    ("no-W_v", {"use_wv": False}),
    ("no-W_w", {"use_ww": False}),
    ("no-W_g", {"use_wg": False}),
    ("none-of-three", {"use_wv": False, "use_ww": False, "use_wg": False}),
    ("linear-sigma", {"linear_sigma": True}),
    ("frozen-random-W", {"freeze_w": True}),
    ("linear-predictor", {"linear_predictor": True}),
)


def ablation_matrix(base: TrainConfig) -> list[tuple[str, TrainConfig]]:
    """The base configuration and its seven single-component variants."""
    return [(name, replace(base, aware=replace(base.aware, **flags))) for name, flags in ABLATIONS]


def ablation_table(results: Mapping[str, RunResult]) -> list[dict]:
    """Rows with mean, std and percentage change of the mean relative to ``base``."""
    base = results["base"].mean
    rows = []
    for name, res in results.items():
        rel = 0.0 if base == 0 else 100.0 * (res.mean - base) / abs(base)
        rows.append({"config": name, "mean": res.mean, "std": res.std, "relative_pct": rel})
    return rows


def write_ablation_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["config", "mean", "std", "relative_pct"])
        w.writeheader()
        w.writerows(rows)


def hyperparameter_grid(base: TrainConfig, grid: Mapping[str, Sequence] = GRID):
    """Yield one TrainConfig per point of the grid."""
    keys = list(grid)
    for combo in itertools.product(*(grid[k] for k in keys)):
        point = dict(zip(keys, combo))
        lr = point.pop("lr", base.lr)
        yield replace(base, lr=lr, aware=replace(base.aware, **point))
