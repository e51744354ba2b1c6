"""Decentralized low-rank matrix completion by Riemannian gossip on the Grassmann manifold."""

from .completion import SparseObservations
from .gossip import AgentState, ProtocolConfig, init_agents, run
from .grassmann import SingularOverlap
from .metrics import RunTrace

__all__ = [
    "AgentState",
    "ProtocolConfig",
    "RunTrace",
    "SingularOverlap",
    "SparseObservations",
    "init_agents",
    "run",
]

__version__ = "0.1.0"
