"""Closed-form stationary states for the cubic and quartic families.

Both families share the structure: the stationary Stieltjes transform solves a
quadratic equation whose discriminant ``P`` is a polynomial with a double root
at a distinguished critical point of ``P'`` (``zeta`` for the cubic, ``xi`` for
the quartic). Everything else (integration constant ``J``, support edges,
density, flux) follows from that root.

``G`` is evaluated through the factorised square root
``(z - zeta) sqrt(z - gamma_-) sqrt(z - gamma_+)`` with principal roots, which is
analytic on the whole upper half-plane. The single-radical form
``sqrt(P(z))`` with the cut on the positive axis agrees with it near the real
axis only; it is exposed as :func:`G_cubic_near_axis`.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import stieltjes
from .cubicsolve import CRITICAL_ATOL, ParameterDomainError, xi_quartic, zeta_cubic
from .model import CubicModel, QuarticModel, critical_a, critical_g

SUBCRITICAL = "subcritical"
CRITICAL = "critical"
SUPERCRITICAL = "supercritical"

#: normalisation slack tolerated when a compact solution is constructed
NORMALIZATION_GUARD = 1e-4


class SubcriticalQuarticError(ParameterDomainError):
    """No probability-valued stationary state exists below ``g_c``."""


class NormalizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class StationarySolution:
    """Stationary state of one model.

    ``support`` is ``None`` for full support, else a ``(lo, hi)`` pair. For the
    subcritical cubic ``gamma`` holds the two complex conjugate-side roots of
    ``P_a`` (lower half-plane); for compact cases it holds the real edges.
    """

    family: str
    regime: str
    J: complex
    zeta: complex
    support: Optional[tuple]
    beta: float
    a: Optional[float] = None
    g: Optional[float] = None
    gamma: tuple = ()
    quartic_c: float = 0.0

    @property
    def flux(self) -> float:
        return flux_rate(self)


def _as_complex_upper(z):
    z = np.asarray(z, dtype=complex)
    # clamp -0.0 so principal roots of negative reals land on +i
    return z.real + 1j * (np.maximum(z.imag, 0.0) + 0.0)


# --------------------------------------------------------------------------- cubic


def P_cubic(z, sol: StationarySolution):
    """``P_a(z) = (z^2 - a)^2 - beta (z - J_a)``."""
    return (z * z - sol.a) ** 2 - sol.beta * (z - sol.J)


def stationary_cubic(m: CubicModel, check_normalization: bool = True) -> StationarySolution:
    a, beta = float(m.a), float(m.beta)
    a_star = critical_a(beta)
    b3 = beta ** (1.0 / 3.0)
    zeta = zeta_cubic(m)
    if abs(a - a_star) < 1e-12:
        regime = CRITICAL
        zeta = complex(-0.5 * b3)
        J = complex(-0.75 * b3)
        support = (-0.5 * b3, 1.5 * b3)
        gamma = support
    else:
        J = zeta - (zeta * zeta - a) ** 2 / beta
        w = cmath.sqrt(2.0 * (a - zeta * zeta))
        g_lo, g_hi = -zeta - w, -zeta + w
        if a < a_star:
            regime = SUBCRITICAL
            support = None
            gamma = tuple(sorted((g_lo, g_hi), key=lambda c: c.real))
        else:
            regime = SUPERCRITICAL
            J = complex(J.real)
            zeta = complex(zeta.real)
            lo, hi = sorted((g_lo.real, g_hi.real))
            support = (lo, hi)
            gamma = support
    sol = StationarySolution("cubic", regime, complex(J), complex(zeta), support, beta,
                             a=a, gamma=gamma)
    if check_normalization and regime != SUBCRITICAL:
        mass = stieltjes.total_mass(density_spec(sol))
        if abs(mass - 1.0) > NORMALIZATION_GUARD:
            raise NormalizationError(f"stationary density integrates to {mass}, not 1")
    return sol


def G_cubic(sol: StationarySolution, z):
    """Stationary Stieltjes transform of the cubic model on the closed upper half-plane."""
    z = _as_complex_upper(z)
    beta, a, zeta = sol.beta, sol.a, sol.zeta
    if sol.regime == SUBCRITICAL:
        g_lo, g_hi = sol.gamma
    else:
        g_lo, g_hi = sol.support
    root = (z - zeta) * np.sqrt(z - g_lo) * np.sqrt(z - g_hi)
    w = z * z - a
    out = _rationalised(root, w, -beta * (z - sol.J), beta)
    return complex(out) if np.ndim(out) == 0 else out


def _rationalised(root, w, delta, beta):
    """``(2/beta)(root - w)`` where ``root**2 = w**2 + delta``.

    Uses ``(2/beta) delta / (root + w)`` wherever ``root ~ w``, which avoids the
    cancellation far from the support.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (2.0 / beta) * (root - w)
        stable = (2.0 / beta) * delta / (root + w)
    use_stable = np.abs(root + w) > np.abs(root - w)
    return np.where(use_stable, stable, direct)


def G_cubic_near_axis(sol: StationarySolution, z):
    """``(2/beta)(a - z^2 + sqrt(P_a(z)))`` with the positive-axis cut.

    Matches :func:`G_cubic` in a neighbourhood of the real axis (and on the
    imaginary axis); far into the left quadrant it picks the other root.
    """
    z = np.asarray(z, dtype=complex)
    out = (2.0 / sol.beta) * (sol.a - z * z + stieltjes.branch_sqrt(P_cubic(z, sol)))
    return complex(out) if np.ndim(out) == 0 else out


def density_cubic(sol: StationarySolution, x):
    """Stationary density of the cubic model."""
    x = np.asarray(x, dtype=float)
    beta = sol.beta
    if sol.regime == SUBCRITICAL:
        out = (2.0 / (beta * np.pi)) * np.imag(stieltjes.branch_sqrt(P_cubic(x + 0j, sol)))
    else:
        lo, hi = sol.support
        inside = (x > lo) & (x < hi)
        xc = np.clip(x, lo, hi)
        out = np.where(inside,
                       (2.0 / (beta * np.pi)) * (xc - sol.zeta.real) * np.sqrt((xc - lo) * (hi - xc)),
                       0.0)
    return float(out) if np.ndim(out) == 0 else out


def density_critical_cubic(x, beta: float):
    """Closed form at ``a = a*``: exponent 3/2 at the lower edge."""
    x = np.asarray(x, dtype=float)
    b3 = beta ** (1.0 / 3.0)
    lo, hi = -0.5 * b3, 1.5 * b3
    xc = np.clip(x, lo, hi)
    out = np.where((x > lo) & (x < hi),
                   (2.0 / (beta * np.pi)) * (xc - lo) ** 1.5 * np.sqrt(hi - xc), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def flux_rate(sol: StationarySolution) -> float:
    """Stationary probability flux ``Im J / pi`` (right to left, per unit mass)."""
    if sol.family != "cubic" or sol.regime != SUBCRITICAL:
        return 0.0
    return sol.J.imag / math.pi


def tail_coefficient(sol: StationarySolution) -> float:
    """``C`` in ``rho(x) ~ C / x^2``; same number as the flux rate."""
    return flux_rate(sol)


# --------------------------------------------------------------------------- quartic


def P_quartic(z, sol: StationarySolution):
    g = sol.g
    return (2.0 * g * z**3 + 0.5 * z) ** 2 - sol.beta * (2.0 * g * z * z - sol.J)


def stationary_quartic(m: QuarticModel) -> StationarySolution:
    g, beta = float(m.g), float(m.beta)
    g_c = critical_g(beta)
    if g < g_c - 1e-12 * abs(g_c):
        raise SubcriticalQuarticError(
            f"g={g} < g_c={g_c}: the stationary solution is not a probability density"
        )
    if g == 0.0:
        gamma2 = 2.0 * beta
        return StationarySolution("quartic", SUPERCRITICAL, complex(-0.5), complex(math.inf),
                                  (-math.sqrt(gamma2), math.sqrt(gamma2)), beta, g=0.0,
                                  gamma=(-math.sqrt(gamma2), math.sqrt(gamma2)), quartic_c=0.5)
    s = math.sqrt(max(0.0, 1.0 + 24.0 * beta * g))
    if g < 0:
        xi = complex(xi_quartic(m))
    else:
        # confining side: the double roots sit on the imaginary axis
        x_plus = -(1.0 + 0.5 * s) / (6.0 * g)
        xi = -1j * math.sqrt(-x_plus)
    xi2 = (xi * xi).real
    J = -((xi2 * (2.0 * g * xi2 + 0.5) ** 2) - 2.0 * beta * g * xi2) / beta
    if abs(1.0 - s) < 1e-6:
        # 1 - sqrt(1 + u) = -u/2 + u^2/8 - ...  with u = 24 beta g
        u = 24.0 * beta * g
        one_minus_s = -u / 2 + u * u / 8 - u**3 / 16
    else:
        one_minus_s = 1.0 - s
    gamma2 = -one_minus_s / (6.0 * g)
    gam = math.sqrt(gamma2)
    regime = CRITICAL if abs(g - g_c) <= 1e-12 * abs(g_c) else SUPERCRITICAL
    c = s / 6.0 + 1.0 / 3.0
    return StationarySolution("quartic", regime, complex(J), xi, (-gam, gam), beta, g=g,
                              gamma=(-gam, gam), quartic_c=c)


def G_quartic(sol: StationarySolution, z):
    z = _as_complex_upper(z)
    g, gam, c = sol.g, sol.support[1], sol.quartic_c
    root = (2.0 * g * z * z + c) * np.sqrt(z - gam) * np.sqrt(z + gam)
    w = 2.0 * g * z**3 + 0.5 * z
    out = _rationalised(root, w, -sol.beta * (2.0 * g * z * z - sol.J), sol.beta)
    return complex(out) if np.ndim(out) == 0 else out


def density_quartic(sol: StationarySolution, x):
    x = np.asarray(x, dtype=float)
    g, gam, c = sol.g, sol.support[1], sol.quartic_c
    x2 = np.minimum(x * x, gam * gam)
    out = np.where(np.abs(x) < gam,
                   (2.0 / (sol.beta * np.pi)) * (2.0 * g * x2 + c) * np.sqrt(gam * gam - x2), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def density_critical_quartic(x, beta: float):
    """``(4 beta - x^2)^{3/2} / (6 pi beta^2)`` on ``|x| <= 2 sqrt(beta)``."""
    x = np.asarray(x, dtype=float)
    u = np.maximum(4.0 * beta - x * x, 0.0)
    out = u**1.5 / (6.0 * math.pi * beta * beta)
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------- generic


def stationary(m) -> StationarySolution:
    if isinstance(m, CubicModel):
        return stationary_cubic(m)
    return stationary_quartic(m)


def G(sol: StationarySolution, z):
    return G_cubic(sol, z) if sol.family == "cubic" else G_quartic(sol, z)


def density(sol: StationarySolution, x):
    return density_cubic(sol, x) if sol.family == "cubic" else density_quartic(sol, x)


def quadratic_residual(sol: StationarySolution, z, Gz=None):
    """Residual of the stationary quadratic equation at ``z``."""
    z = np.asarray(z, dtype=complex)
    Gz = G(sol, z) if Gz is None else Gz
    b = sol.beta
    if sol.family == "cubic":
        return b / 4.0 * Gz * Gz + (z * z - sol.a) * Gz + z - sol.J
    g = sol.g
    return b / 4.0 * Gz * Gz + (2.0 * g * z**3 + 0.5 * z) * Gz + 2.0 * g * z * z - sol.J


def density_spec(sol: StationarySolution) -> stieltjes.DensitySpec:
    """Wrap the stationary density for the generic quadrature routines."""
    f = lambda x: density(sol, x)
    if sol.support is None:
        return stieltjes.DensitySpec(f, None, tail_coefficient(sol),
                                     breakpoints=(float(sol.zeta.real),))
    lo, hi = sol.support
    if sol.regime == CRITICAL:
        exps = ((1.5, 0.5),) if sol.family == "cubic" else ((1.5, 1.5),)
    else:
        exps = ((0.5, 0.5),)
    return stieltjes.DensitySpec(f, ((lo, hi),), edge_exponents=exps)


def solution_summary(sol: StationarySolution) -> dict:
    """JSON-friendly description of a stationary solution."""
    out = {
        "family": sol.family,
        "regime": sol.regime,
        "beta": sol.beta,
        "J_real": sol.J.real,
        "J_imag": sol.J.imag,
        "flux_rate": flux_rate(sol),
    }
    if sol.family == "cubic":
        out.update(a=sol.a, a_star=critical_a(sol.beta),
                   zeta_real=sol.zeta.real, zeta_imag=sol.zeta.imag)
    else:
        out.update(g=sol.g, g_c=critical_g(sol.beta),
                   xi=sol.zeta.real if math.isfinite(sol.zeta.real) else None)
    if sol.support is None:
        out["support"] = "full-line"
        out["tail_coefficient"] = tail_coefficient(sol)
    else:
        out["support"] = [sol.support[0], sol.support[1]]
    return out
