"""Stationary and dynamical spectral densities of non-confining random matrix models."""
from .model import CubicModel, QuarticModel, critical_a, critical_g
from .equilibrium import stationary, G, density, StationarySolution

__all__ = [
    "CubicModel",
    "QuarticModel",
    "critical_a",
    "critical_g",
    "stationary",
    "G",
    "density",
    "StationarySolution",
]

__version__ = "0.1.0"
