"""Attention-weighted walk aggregation for graph-level prediction.

The model lives in :mod:`aware.model`, its brute-force walk oracle in
:mod:`aware.walks`, and training in :mod:`aware.train`.
"""

__version__ = "0.1.0"

from .graph import AttributeSchema, Dataset, Graph, SplitSpec, graph_from_edges, split_dataset
from .model import AwareConfig, AwareParams, ForwardTrace, forward, init_params
from .train import RunResult, TrainConfig, seed_sweep, train

__all__ = [
    "AttributeSchema",
    "AwareConfig",
    "AwareParams",
    "Dataset",
    "ForwardTrace",
    "Graph",
    "RunResult",
    "SplitSpec",
    "TrainConfig",
    "forward",
    "graph_from_edges",
    "init_params",
    "seed_sweep",
    "split_dataset",
    "train",
]
