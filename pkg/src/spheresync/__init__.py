"""Consensus on the unit sphere under switching directed graphs, and its lifting to R^d."""

__version__ = "0.1.0"

from .dynamics import WeightFamily  # noqa: E402
from .graph import DirectedGraph, GraphSchedule  # noqa: E402
from .integrator import IntegrationConfig, Trajectory  # noqa: E402

__all__ = ["DirectedGraph", "GraphSchedule", "IntegrationConfig", "Trajectory", "WeightFamily"]
