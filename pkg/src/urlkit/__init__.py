"""Finite coalgebras, MDP solvers, asynchronous iteration, metric coinduction,
finite topos constructions, compositional learners and decision-model checks."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
