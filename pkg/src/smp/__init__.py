"""Sampling-based structured message passing for discrete Markov networks."""
from .cluster_graph import JoinGraphParams, build_join_graph, build_junction_tree
from .engine import EngineConfig, ReprKind, run_algorithm_1
from .exact import exact_marginals
from .factor import DenseFactor, GraphicalModel
from .sampling import SamplerConfig, generate_samples
from .uai import parse_uai

__version__ = "0.1.0"

__all__ = [
    "DenseFactor", "GraphicalModel", "parse_uai", "JoinGraphParams", "build_join_graph",
    "build_junction_tree", "SamplerConfig", "generate_samples", "EngineConfig", "ReprKind",
    "run_algorithm_1", "exact_marginals",
]
