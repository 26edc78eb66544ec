"""Heterogeneous temporal hypergraph construction, encoding, and link prediction."""

from .graph import NodeRef, Snapshot, TemporalGraph, TypedEdge, parse_snapshots
from .hyper import TemporalHypergraph, construct_hthg, star_expand
from .model import EmbeddingTable, Encoder, GraphSchema, ModelConfig
from .objective import TrainedModel, train
from .evaluation import EvalReport, evaluate, ranking_metrics, run_experiment
from .synthetic import SyntheticSpec, generate_synthetic_htg

__all__ = [
    "NodeRef",
    "Snapshot",
    "TemporalGraph",
    "TypedEdge",
    "parse_snapshots",
    "TemporalHypergraph",
    "construct_hthg",
    "star_expand",
    "EmbeddingTable",
    "Encoder",
    "GraphSchema",
    "ModelConfig",
    "TrainedModel",
    "train",
    "EvalReport",
    "evaluate",
    "ranking_metrics",
    "run_experiment",
    "SyntheticSpec",
    "generate_synthetic_htg",
]

__version__ = "0.1.0"
