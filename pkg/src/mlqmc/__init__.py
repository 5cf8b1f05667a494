"""Bayesian multilevel quasi-Monte Carlo on lattices and digital nets."""
from ._backend import COMPILED

__version__ = "0.1.0"
__all__ = ["COMPILED", "__version__"]
