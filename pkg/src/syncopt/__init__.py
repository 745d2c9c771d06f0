"""Design and verification toolkit for optimal output synchronization of
heterogeneous leader-follower linear multi-agent networks."""

from .errors import NumericalError, ToolkitError, ValidationError
from .plant import AgentDynamics, LeaderModel
from .topology import Topology, build_topology

__all__ = [
    "AgentDynamics",
    "LeaderModel",
    "NumericalError",
    "Topology",
    "ToolkitError",
    "ValidationError",
    "build_topology",
]

__version__ = "0.1.0"
