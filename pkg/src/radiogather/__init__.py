"""Deterministic ad-hoc radio network simulator with information-gathering protocols."""
from .digraph import Digraph, compute_scc, generate
from .simulator import NetworkModel, Trace, run

__all__ = ["Digraph", "NetworkModel", "Trace", "compute_scc", "generate", "run"]
__version__ = "0.1.0"
