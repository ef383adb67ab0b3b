"""Explore-then-learn batch reinforcement learning at desk scale."""
from .kernels import BACKEND

__version__ = "0.1.0"
