"""Evaluation metrics for graph-level predictions."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import MetricError

METRICS = ("ACC", "ROC-AUC", "RMSE", "MAE")
HIGHER_IS_BETTER = {"ACC": True, "ROC-AUC": True, "RMSE": False, "MAE": False}
CLASSIFICATION_METRICS = ("ACC", "ROC-AUC")


def check_metric(metric: str, task_kind: str) -> None:
    if metric not in METRICS:
        raise MetricError(f"unknown metric {metric!r}; expected one of {METRICS}")
    is_clf = task_kind != "regression"
    if is_clf != (metric in CLASSIFICATION_METRICS):
        raise MetricError(f"metric {metric} does not apply to a {task_kind} task")
    if metric == "ROC-AUC" and task_kind != "binary-classification":
        raise MetricError("ROC-AUC is defined for binary classification only")


def accuracy(outputs: np.ndarray, labels, task_kind: str = "binary-classification") -> float:
    """Threshold-0 accuracy on logits (binary) or argmax accuracy (multiclass)."""
    outputs = np.atleast_2d(outputs)
    labels = np.asarray(labels, dtype=float)
    if task_kind == "multiclass-classification":
        pred = outputs.argmax(axis=0)
        return float(np.mean(pred == labels.astype(int)))
    pred = outputs.reshape(-1) > 0
    return float(np.mean(pred == (labels > 0)))


def roc_auc(scores, labels) -> float:
    """Mann-Whitney U statistic divided by ``n_pos * n_neg``; ties count one half."""
    scores = np.asarray(scores, dtype=float).reshape(-1)
    pos = np.asarray(labels).reshape(-1) > 0
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricError("ROC-AUC is undefined when only one class is present")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def rmse(pred, target) -> float:
    d = np.asarray(pred, dtype=float).reshape(-1) - np.asarray(target, dtype=float).reshape(-1)
    return float(np.sqrt(np.mean(d * d)))


def mae(pred, target) -> float:
    d = np.asarray(pred, dtype=float).reshape(-1) - np.asarray(target, dtype=float).reshape(-1)
    return float(np.mean(np.abs(d)))


def score(metric: str, outputs: np.ndarray, labels, task_kind: str) -> float:
    """Compute ``metric`` from raw head outputs (``output_dim x N``)."""
    check_metric(metric, task_kind)
    if metric == "ACC":
        return accuracy(outputs, labels, task_kind)
    if metric == "ROC-AUC":
        return roc_auc(np.asarray(outputs).reshape(-1), labels)
    if metric == "RMSE":
        return rmse(outputs, labels)
    return mae(outputs, labels)


def improved(metric: str, new: float, best: float | None) -> bool:
    """Strict improvement in the metric's preferred direction."""
    if best is None:
        return True
    return new > best if HIGHER_IS_BETTER[metric] else new < best
