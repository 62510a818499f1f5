"""Stieltjes transforms of densities on the real line.

Sign convention: ``G(z) = int rho(x) / (x - z) dx`` so that ``G`` maps the upper
half-plane into itself and ``G(iy) ~ -1/(iy)`` for a probability density.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

#: default full-line truncation window
FULL_LINE_X = 1.0e4
#: default epsilon ladder for the inversion formula
DEFAULT_EPSILONS = (0.1, 0.05, 0.025, 0.0125)


class QuadratureError(RuntimeError):
    """Adaptive quadrature missed its tolerance."""

    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved error estimate {achieved:.3g})")
        self.achieved = achieved


class ExtrapolationWarning(RuntimeWarning):
    """The epsilon -> 0 extrapolation did not settle."""


def branch_sqrt(z):
    """Square root with the cut on the positive real axis.

    ``sqrt(r e^{i theta}) = sqrt(r) e^{i theta/2}`` for ``theta in [0, 2 pi)``; the
    image is the closed upper half-plane. Equals the principal root when that
    has nonnegative imaginary part and its negative otherwise.
    """
    s = np.sqrt(np.asarray(z, dtype=complex))
    s = np.where(s.imag < 0, -s, s)
    if s.ndim == 0:
        return complex(s)
    return s


@dataclass(frozen=True)
class DensitySpec:
    """A density given by an evaluator plus enough shape data to integrate it.

    ``support`` is a tuple of ``(lo, hi)`` intervals, or ``None`` for the whole
    line. In the full-line case ``tail_coefficient`` is ``C`` in
    ``rho(x) ~ C / x**2``. ``edge_exponents`` gives, per interval, the vanishing
    orders at ``lo`` and ``hi`` (used only to pick the substitution).
    """

    evaluator: Callable
    support: Optional[tuple] = None
    tail_coefficient: float = 0.0
    edge_exponents: Optional[tuple] = None
    breakpoints: tuple = field(default_factory=tuple)

    @property
    def full_line(self) -> bool:
        return self.support is None

    def __call__(self, x):
        return self.evaluator(x)


def _edge_map(lo, hi):
    """``x = lo + (hi-lo)(1-cos t)/2``: clusters nodes at both edges."""
    half = 0.5 * (hi - lo)

    def x_of(t):
        return lo + half * (1.0 - math.cos(t))

    def jac(t):
        return half * math.sin(t)

    return x_of, jac


def _quad_complex(f, lo, hi, points=None, epsrel=1e-10, epsabs=1e-13, limit=400, target=None):
    kw = dict(epsrel=epsrel, epsabs=epsabs, limit=limit)
    if points is not None:
        pts = [p for p in points if lo < p < hi]
        if pts:
            kw["points"] = pts
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        re, err_re = integrate.quad(lambda t: f(t).real, lo, hi, **kw)
        im, err_im = integrate.quad(lambda t: f(t).imag, lo, hi, **kw)
    err = math.hypot(err_re, err_im)
    if target is not None and err > target:
        raise QuadratureError("Stieltjes quadrature did not converge", err)
    return complex(re, im), err


def _full_line_tail(z, C, X):
    """``int_{|x|>X} C / (x^2 (x - z)) dx`` summed as an odd power series."""
    w = z / X
    if abs(w) < 0.5:
        # 2C/X^2 * sum_{k odd >= 3} w^(k-1)/k, finite at z = 0
        s = 0j
        wk = 1.0 + 0j
        for k in range(3, 60, 2):
            wk = wk * w * w
            term = wk / k
            s += term
            if abs(term) < 1e-18:
                break
        return 2.0 * C * s / (X * X)
    return C * ((np.log(1 + w) - np.log(1 - w)) / z**2 - 2.0 / (z * X))


def total_mass(d: DensitySpec, X: float = FULL_LINE_X) -> float:
    """Integral of the density (with the analytic ``2C/X`` tail mass when full-line)."""
    f = d.evaluator
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if d.full_line:
            inner = 50.0
            pts = [p for p in d.breakpoints if -inner < p < inner]
            total += integrate.quad(f, -inner, inner, points=pts or None, limit=400,
                                    epsrel=1e-12, epsabs=1e-14)[0]
            # x = +-1/u straightens the C/x^2 decay
            for sgn in (1.0, -1.0):
                total += integrate.quad(lambda u, s=sgn: f(s / u) / (u * u), 1.0 / X,
                                        1.0 / inner, limit=400, epsrel=1e-12, epsabs=1e-14)[0]
            total += 2.0 * d.tail_coefficient / X
        else:
            for lo, hi in d.support:
                x_of, jac = _edge_map(lo, hi)
                total += integrate.quad(lambda t: f(x_of(t)) * jac(t), 0.0, math.pi,
                                        limit=400, epsrel=1e-12, epsabs=1e-14)[0]
    return float(total)


def stieltjes_quadrature(d: DensitySpec, z: complex, X: float = FULL_LINE_X,
                         rtol: float = 1e-9) -> complex:
    """``int rho(x)/(x - z) dx`` by adaptive Gauss-Kronrod quadrature."""
    z = complex(z)
    if not z.imag > 0:
        raise ValueError("stieltjes_quadrature needs Im z > 0")
    f = d.evaluator
    # absolute target scaled by |G| ~ 1/Im z
    target = max(1e-7, rtol * 1e3) / max(z.imag, 1e-3)
    if d.full_line:
        inner = 50.0
        pts = sorted(set([z.real] + [p for p in d.breakpoints]))
        val, _ = _quad_complex(lambda x: f(x) / (x - z), -inner, inner, points=pts,
                               target=target)
        for sgn in (1.0, -1.0):
            def h(u, sgn=sgn):
                x = sgn / u
                return f(x) / (x - z) / (u * u)
            v, _ = _quad_complex(h, 1.0 / X, 1.0 / inner, target=target)
            val += v
        val += _full_line_tail(z, d.tail_coefficient, X)
        return val
    val = 0j
    for lo, hi in d.support:
        x_of, jac = _edge_map(lo, hi)
        # node clustering where the kernel peaks
        pts = None
        if lo < z.real < hi:
            pts = [math.acos(1.0 - 2.0 * (z.real - lo) / (hi - lo))]
        v, _ = _quad_complex(lambda t: f(x_of(t)) * jac(t) / (x_of(t) - z), 0.0, math.pi,
                             points=pts, target=target)
        val += v
    return val


def richardson(values: Sequence[float], ratio: float = 2.0) -> np.ndarray:
    """Neville table for a sequence sampled at ``h, h/ratio, h/ratio**2, ...``.

    Row ``k`` removes error terms up to order ``h**k``. Returns the table.
    """
    v = np.asarray(values, dtype=float)
    n = len(v)
    T = np.full((n, n), np.nan)
    T[:, 0] = v
    for k in range(1, n):
        fac = ratio**k
        for i in range(k, n):
            T[i, k] = (fac * T[i, k - 1] - T[i - 1, k - 1]) / (fac - 1.0)
    return T


def invert_stieltjes(G: Callable, x: float, epsilons: Sequence[float] = DEFAULT_EPSILONS,
                     tol: float = 1e-6) -> float:
    """Pointwise density ``lim Im G(x + i eps) / pi`` by Richardson extrapolation.

    ``epsilons`` must be a halving ladder. A :class:`ExtrapolationWarning` is
    emitted when the last two diagonal entries disagree by more than ``tol``.
    """
    eps = np.asarray(epsilons, dtype=float)
    ratio = eps[0] / eps[1]
    vals = [complex(G(complex(x, e))).imag / math.pi for e in eps]
    T = richardson(vals, ratio)
    n = len(vals)
    est = T[n - 1, n - 1]
    if n > 1 and abs(est - T[n - 1, n - 2]) > tol * (1.0 + abs(est)):
        warnings.warn(f"inversion at x={x} not settled: {T[n-1, n-2]} vs {est}",
                      ExtrapolationWarning, stacklevel=2)
    return float(est)


def pv_integral(d: DensitySpec, lam: float, X: float = FULL_LINE_X) -> float:
    """Principal value ``PV int rho(x)/(x - lam) dx``.

    The singular part is removed by subtracting ``rho(lam)`` and adding back its
    exact principal value ``rho(lam) log((hi - lam)/(lam - lo))``.
    """
    f = d.evaluator
    lam = float(lam)
    r0 = float(f(lam))

    def smooth(x):
        if x == lam:
            return 0.0
        return (f(x) - r0) / (x - lam)

    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if d.full_line:
            inner = 50.0
            pts = sorted(set([lam] + [p for p in d.breakpoints if -inner < p < inner]))
            total += integrate.quad(smooth, -inner, inner, points=pts, limit=400,
                                    epsrel=1e-11, epsabs=1e-13)[0]
            for sgn in (1.0, -1.0):
                def h(u, sgn=sgn):
                    x = sgn / u
                    return f(x) / (x - lam) / (u * u)
                total += integrate.quad(h, 1.0 / X, 1.0 / inner, limit=400,
                                        epsrel=1e-11, epsabs=1e-14)[0]
            if r0 != 0.0:
                total += r0 * math.log((inner - lam) / (inner + lam))
            total += _full_line_tail(complex(lam, 0.0), d.tail_coefficient, X).real
            return float(total)
        for lo, hi in d.support:
            x_of, jac = _edge_map(lo, hi)
            inside = lo < lam < hi
            if inside:
                t_lam = math.acos(1.0 - 2.0 * (lam - lo) / (hi - lo))
                total += integrate.quad(lambda t: smooth(x_of(t)) * jac(t), 0.0, math.pi,
                                        points=[t_lam], limit=400,
                                        epsrel=1e-11, epsabs=1e-13)[0]
                total += r0 * math.log((hi - lam) / (lam - lo))
            else:
                total += integrate.quad(lambda t: f(x_of(t)) * jac(t) / (x_of(t) - lam),
                                        0.0, math.pi, limit=400,
                                        epsrel=1e-11, epsabs=1e-13)[0]
    return float(total)


@dataclass(frozen=True)
class AkhiezerReport:
    """Outcome of the Stieltjes-transform criterion check."""

    ys: tuple
    mass_errors: tuple
    min_imag: float
    passed: bool


def akhiezer_check(G: Callable, ys=(1e2, 1e3, 1e4, 1e6), mass_tol: float = 1e-3,
                   imag_floor: float = -1e-12) -> AkhiezerReport:
    """Check ``G(iy) ~ -1/(iy)`` and ``Im G >= 0`` on a test grid in H.

    Passes iff the mass errors ``|iy G(iy) + 1|`` are non-increasing along
    ``ys`` and end below ``mass_tol``, and the smallest imaginary part found on
    the grid is at least ``imag_floor``.
    """
    errs = tuple(abs(1j * y * complex(G(1j * y)) + 1.0) for y in ys)
    xs = np.linspace(-10.0, 10.0, 41)
    yg = np.logspace(-3, 2, 11)
    min_im = min(complex(G(complex(x, y))).imag for x in xs for y in yg)
    monotone = all(b <= a * (1 + 1e-9) + 1e-15 for a, b in zip(errs, errs[1:]))
    passed = bool(monotone and errs[-1] < mass_tol and min_im >= imag_floor)
    return AkhiezerReport(tuple(ys), errs, float(min_im), passed)


def piecewise_linear_transform(xs, rho, normalize: bool = True) -> Callable:
    """Closed-form Stieltjes transform of the linear interpolant of ``(xs, rho)``.

    On ``[x0, x1]`` with ``rho = r0 + s (x - x0)``:
    ``int rho/(x - z) = (r0 + s (z - x0)) log((x1 - z)/(x0 - z)) + s (x1 - x0)``,
    with the principal log continuous because ``x - z`` stays in the lower half-plane.
    """
    xs = np.asarray(xs, dtype=float)
    r = np.asarray(rho, dtype=float)
    if xs.ndim != 1 or xs.size < 2 or xs.shape != r.shape:
        raise ValueError("need matching 1-d arrays with at least two points")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("grid must be strictly increasing")
    if np.any(r < 0):
        raise ValueError("density must be nonnegative")
    mass = float(np.sum(0.5 * (r[1:] + r[:-1]) * np.diff(xs)))
    if mass <= 0:
        raise ValueError("density has zero mass")
    if normalize:
        r = r / mass
    x0, x1 = xs[:-1], xs[1:]
    r0 = r[:-1]
    s = np.diff(r) / np.diff(xs)

    def G(z):
        z = np.asarray(z, dtype=complex)
        zz = z[..., None]
        val = (r0 + s * (zz - x0)) * (np.log(x1 - zz) - np.log(x0 - zz)) + s * (x1 - x0)
        return val.sum(axis=-1)

    G.mass = mass
    return G
