"""Potential families and their critical thresholds.

Two non-confining families are supported:

* cubic   ``V_a(x) = x**3/3 - a*x``, drift ``a - x**2``
* quartic ``U_g(x) = x**2/2 + g*x**4``, drift ``-(x/2 + 2*g*x**3) = -U_g'(x)/2``

The cubic drift is the full gradient of ``V_a`` while the quartic one is half
the gradient of ``U_g``; both are the conventions of the matrix dynamics.

Models are plain frozen records; thresholds are recomputed on every access.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class CubicModel:
    """Cubic potential with linear tilt ``a`` and Dyson index ``beta``."""

    a: float
    beta: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta!r}")

    @property
    def a_star(self) -> float:
        return critical_a(self.beta)

    family = "cubic"


@dataclass(frozen=True)
class QuarticModel:
    """Quartic potential with coupling ``g`` (non-confining for ``g < 0``)."""

    g: float
    beta: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta!r}")

    @property
    def g_c(self) -> float:
        return critical_g(self.beta)

    family = "quartic"


Model = Union[CubicModel, QuarticModel]


def potential_cubic(x, m: CubicModel):
    x = np.asarray(x, dtype=float) if not np.isscalar(x) else x
    return x**3 / 3.0 - m.a * x


def drift_cubic(x, m: CubicModel):
    """``-V_a'(x) = a - x**2``."""
    return m.a - x * x


def potential_quartic(x, m: QuarticModel):
    x2 = x * x
    return 0.5 * x2 + m.g * x2 * x2


def drift_quartic(x, m: QuarticModel):
    """``-U_g'(x)/2 = -(x/2 + 2 g x**3)``."""
    return -(0.5 * x + 2.0 * m.g * x * x * x)


def critical_a(beta: float) -> float:
    """Tilt at which the cubic stationary density loses compact support."""
    return 0.75 * float(beta) ** (2.0 / 3.0)


def critical_g(beta: float) -> float:
    """Smallest coupling for which a quartic stationary density exists."""
    return -1.0 / (24.0 * float(beta))


def drift(x, m: Model):
    if isinstance(m, CubicModel):
        return drift_cubic(x, m)
    return drift_quartic(x, m)


def potential(x, m: Model):
    if isinstance(m, CubicModel):
        return potential_cubic(x, m)
    return potential_quartic(x, m)


def barrier_height(m: CubicModel) -> float:
    """``V_a(-sqrt a) - V_a(sqrt a) = 4/3 a^{3/2}`` for ``a > 0`` (0 otherwise)."""
    if m.a <= 0:
        return 0.0
    r = np.sqrt(m.a)
    return float(potential_cubic(-r, m) - potential_cubic(r, m))
