"""Closed-form cubic roots and the distinguished roots of the stationary analysis.

The discriminant convention used throughout is that of the depressed cubic
``t**3 + p t + q``::

    disc = -(4 p**3 + 27 q**2)

so ``disc > 0`` means three distinct real roots, ``disc == 0`` a repeated real
root and ``disc < 0`` one real root plus a complex-conjugate pair.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .model import CubicModel, QuarticModel, critical_a, critical_g

THREE_REAL = "three-distinct-real"
DOUBLE_REAL = "real-with-double"
TRIPLE_REAL = "triple-real"
ONE_REAL = "one-real-two-conjugate"

# Roots closer than this, relative to the root scale, are reported as a multiple root.
MERGE_RTOL = 1e-7
# Distance to a* below which the factored critical forms are used.
CRITICAL_ATOL = 1e-10

_J = complex(-0.5, math.sqrt(3.0) / 2.0)


class DegenerateCubicError(ValueError):
    """Leading coefficient is zero."""


class ParameterDomainError(ValueError):
    """Parameters outside the range where a quantity is defined."""


@dataclass(frozen=True)
class CubicRoots:
    """Roots of ``c3 z^3 + c2 z^2 + c1 z + c0``.

    Real roots come first in ascending order; a complex pair is listed as
    (upper half-plane root, conjugate).
    """

    roots: tuple
    classification: str
    discriminant: float

    @property
    def real_roots(self) -> list:
        return sorted(r.real for r in self.roots if r.imag == 0.0)


def _polish(coeffs, r):
    c3, c2, c1, c0 = coeffs
    p = ((c3 * r + c2) * r + c1) * r + c0
    dp = (3 * c3 * r + 2 * c2) * r + c1
    if dp == 0:
        return r
    step = p / dp
    # refuse a step that makes the residual worse (near multiple roots)
    r_new = r - step
    p_new = ((c3 * r_new + c2) * r_new + c1) * r_new + c0
    return r_new if abs(p_new) <= abs(p) else r


def solve_cubic(c3: float, c2: float, c1: float, c0: float) -> CubicRoots:
    """Cardan's formulas for a real cubic, with one Newton polish per root."""
    if c3 == 0:
        raise DegenerateCubicError("leading coefficient c3 must be nonzero")
    b, c, d = c2 / c3, c1 / c3, c0 / c3
    # rescale z -> sigma z so the monic coefficients are O(1); keeps p^3 and
    # q^2 away from under/overflow
    sigma = max(abs(b), math.sqrt(abs(c)), abs(d) ** (1.0 / 3.0))
    if sigma == 0.0:
        return CubicRoots((0j, 0j, 0j), TRIPLE_REAL, 0.0)
    if not 1e-30 < sigma < 1e30:
        r = solve_cubic(1.0, b / sigma, c / sigma / sigma, d / sigma / sigma / sigma)
        roots = tuple(complex(z.real * sigma, z.imag * sigma) for z in r.roots)
        return CubicRoots(roots, r.classification, r.discriminant * sigma**3 * sigma**3)
    shift = b / 3.0
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    disc = -(4.0 * p**3 + 27.0 * q * q)
    coeffs = (c3, c2, c1, c0)

    if p == 0.0 and q == 0.0:
        r = -shift
        return CubicRoots((complex(r), complex(r), complex(r)), TRIPLE_REAL, 0.0)

    half_delta = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if half_delta > 0.0:
        # one real root; pick the cube root without cancellation
        sq = math.sqrt(half_delta)
        w = -q / 2.0 - sq if q > 0 else -q / 2.0 + sq
        u = np.cbrt(w)
        v = -p / (3.0 * u) if u != 0.0 else 0.0
        t1 = u + v
        re = -t1 / 2.0 - shift
        im = abs(math.sqrt(3.0) / 2.0 * (u - v))
        r1 = _polish(coeffs, t1 - shift)
        rc = _polish(coeffs, complex(re, im))
        if isinstance(r1, complex):
            r1 = r1.real
        rc = complex(rc.real, abs(rc.imag))
        if abs(rc.imag) < MERGE_RTOL * (1.0 + sigma):
            # numerically a double real root
            return _classify_real(coeffs, [r1, rc.real, rc.real], disc, sigma)
        return CubicRoots((complex(r1), rc, rc.conjugate()), ONE_REAL, disc)

    # three real roots, trigonometric form
    m = 2.0 * math.sqrt(-p / 3.0)
    arg = 3.0 * q / (p * m) if p != 0 else 0.0
    theta = math.acos(min(1.0, max(-1.0, arg)))
    ts = [m * math.cos(theta / 3.0 - 2.0 * math.pi * k / 3.0) for k in range(3)]
    rs = [_polish(coeffs, t - shift) for t in ts]
    return _classify_real(coeffs, rs, disc, sigma)


def _classify_real(coeffs, rs, disc, sigma=1.0):
    # sigma is the root scale of the cubic; a double root is only resolved to
    # about sqrt(eps) of it
    rs = sorted(float(np.real(r)) for r in rs)
    close01 = abs(rs[1] - rs[0]) < MERGE_RTOL * (1 + sigma)
    close12 = abs(rs[2] - rs[1]) < MERGE_RTOL * (1 + sigma)
    if close01 and close12:
        r = sum(rs) / 3.0
        rs = [r, r, r]
        cls = TRIPLE_REAL
    elif close01:
        r = 0.5 * (rs[0] + rs[1])
        rs = [r, r, rs[2]]
        cls = DOUBLE_REAL
    elif close12:
        r = 0.5 * (rs[1] + rs[2])
        rs = [rs[0], r, r]
        cls = DOUBLE_REAL
    else:
        cls = THREE_REAL
    return CubicRoots(tuple(complex(r) for r in rs), cls, disc)


def pprime_cubic(z, m: CubicModel):
    """``P'(z) = 4 z^3 - 4 a z - beta``."""
    return 4.0 * z**3 - 4.0 * m.a * z - m.beta


def zeta_cubic(m: CubicModel) -> complex:
    """Distinguished root of ``P'(z) = 4z^3 - 4az - beta``.

    Below ``a*`` this is the root in the open upper half-plane, evaluated with
    the explicit cube-root expression. At and above ``a*`` it is the minimal
    real root.
    """
    a, beta = float(m.a), float(m.beta)
    a_star = critical_a(beta)
    b3 = beta ** (1.0 / 3.0)
    if abs(a - a_star) < CRITICAL_ATOL:
        return complex(-0.5 * b3)
    if a < a_star:
        s = math.sqrt(1.0 - (a / a_star) ** 3)
        # real (sign-preserving) cube root: 1 - s < 0 whenever a < 0
        z = 0.5 * b3 * (np.cbrt(1.0 + s) * _J + np.cbrt(1.0 - s) * _J * _J)
        z = complex(z)
        # one Newton polish on P'
        dp = 12.0 * z * z - 4.0 * a
        if dp != 0:
            z_new = z - (4.0 * z**3 - 4.0 * a * z - beta) / dp
            if abs(pprime_cubic(z_new, m)) <= abs(pprime_cubic(z, m)):
                z = z_new
        return z
    roots = solve_cubic(4.0, 0.0, -4.0 * a, -beta)
    return complex(min(r.real for r in roots.roots))


def quartic_x_roots(m: QuarticModel) -> tuple:
    """The two roots ``X_-, X_+`` of ``24 g^2 X^2 + 8 g X + 1/2 - 4 beta g``."""
    g, beta = float(m.g), float(m.beta)
    disc = 1.0 + 24.0 * beta * g
    s = cmath.sqrt(disc) if disc < 0 else math.sqrt(disc)
    x_plus = -(1.0 + 0.5 * s) / (6.0 * g)
    x_minus = -(1.0 - 0.5 * s) / (6.0 * g)
    return x_minus, x_plus


def xi_quartic(m: QuarticModel) -> float:
    """Minimal real root ``-sqrt(X_+)`` of ``P_g'(z)``, for ``g_c <= g < 0``."""
    g, beta = float(m.g), float(m.beta)
    g_c = critical_g(beta)
    if g >= 0:
        raise ParameterDomainError(f"xi_quartic needs g < 0, got g={g}")
    # tolerate round-off on the critical value itself
    if g < g_c - 1e-12 * abs(g_c):
        raise ParameterDomainError(
            f"g={g} is below the critical coupling g_c={g_c}: 1 + 24 beta g < 0"
        )
    disc = max(0.0, 1.0 + 24.0 * beta * g)
    x_plus = -(1.0 + 0.5 * math.sqrt(disc)) / (6.0 * g)
    return -math.sqrt(x_plus)


def pprime_quartic(z, m: QuarticModel):
    """``P_g'(z) = z (24 g^2 z^4 + 8 g z^2 + 1/2 - 4 beta g)``."""
    g, beta = m.g, m.beta
    z2 = z * z
    return z * (24.0 * g * g * z2 * z2 + 8.0 * g * z2 + 0.5 - 4.0 * beta * g)
