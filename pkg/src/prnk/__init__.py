"""PageRank by refined restarted Hessenberg and Arnoldi processes, with power-method baselines."""

from .google import GoogleOperator, residual_direct
from .graph_io import Graph, build_transition, graph_stats, load_graph
from .krylov import arnoldi_process, hessenberg_process, ritz_pairs
from .solvers import METHODS, SolveConfig, SolveReport, solve

__all__ = [
    "Graph",
    "GoogleOperator",
    "METHODS",
    "SolveConfig",
    "SolveReport",
    "arnoldi_process",
    "build_transition",
    "graph_stats",
    "hessenberg_process",
    "load_graph",
    "residual_direct",
    "ritz_pairs",
    "solve",
]

__version__ = "0.1.0"
