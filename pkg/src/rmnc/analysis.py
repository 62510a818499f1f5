"""Comparison of sampled spectra with analytic densities."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .stieltjes import DensitySpec, total_mass

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


@dataclass
class Histogram:
    """Uniform-bin counts with explicit underflow and overflow counters."""

    lo: float
    hi: float
    counts: np.ndarray
    underflow: int = 0
    overflow: int = 0

    @classmethod
    def empty(cls, lo: float = -6.0, hi: float = 6.0, bins: int = 400) -> "Histogram":
        if not hi > lo or bins < 1:
            raise ValueError("need hi > lo and at least one bin")
        return cls(float(lo), float(hi), np.zeros(int(bins), dtype=np.int64))

    @property
    def bins(self) -> int:
        return self.counts.size

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.bins

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.bins + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[1:] + e[:-1])

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow

    def add(self, samples) -> None:
        x = np.asarray(samples, dtype=float).ravel()
        idx = np.floor((x - self.lo) / self.width).astype(np.int64)
        under = idx < 0
        over = idx >= self.bins
        self.underflow += int(under.sum())
        self.overflow += int(over.sum())
        inside = idx[~(under | over)]
        self.counts += np.bincount(inside, minlength=self.bins)

    def merge(self, other: "Histogram") -> "Histogram":
        if (self.lo, self.hi, self.bins) != (other.lo, other.hi, other.bins):
            raise ValueError("histograms have different bin layouts")
        return Histogram(self.lo, self.hi, self.counts + other.counts,
                         self.underflow + other.underflow, self.overflow + other.overflow)

    def density(self) -> np.ndarray:
        """Counts normalised by the total sample count (so out-of-range mass is missing)."""
        n = self.total
        if n == 0:
            return np.zeros(self.bins)
        return self.counts / (n * self.width)


def bin_averages(rho: DensitySpec, edges) -> np.ndarray:
    """Average of ``rho`` over each bin by 5-point Gauss-Legendre."""
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = np.asarray(rho(x.ravel()), dtype=float).reshape(x.shape)
    avg = 0.5 * (vals * _GL_WEIGHTS[None, :]).sum(axis=1)
    # Gauss-Legendre is slow to converge on a bin holding a support edge or kink
    for k in np.flatnonzero(_nonsmooth_bins(rho, lo, hi)):
        avg[k] = mass_inside(rho, lo[k], hi[k]) / (hi[k] - lo[k])
    return avg


def _nonsmooth_bins(rho: DensitySpec, lo, hi) -> np.ndarray:
    pts = list(rho.breakpoints)
    if rho.support is not None:
        for a, b in rho.support:
            pts.extend([a, b])
    mask = np.zeros(lo.shape, dtype=bool)
    for p in pts:
        mask |= (lo <= p) & (p <= hi)
    return mask


def mass_inside(rho: DensitySpec, lo: float, hi: float) -> float:
    """``int_lo^hi rho`` with the breakpoints of ``rho`` respected."""
    pts = list(rho.breakpoints)
    if rho.support is not None:
        for a, b in rho.support:
            pts.extend([a, b])
    pts = sorted(p for p in pts if lo < p < hi) or None
    if hi <= lo:
        return 0.0
    return float(integrate.quad(lambda x: float(rho(x)), lo, hi, points=pts, limit=400,
                                epsabs=1e-12, epsrel=1e-10)[0])


def l1_distance(h: Histogram, rho: DensitySpec) -> float:
    """Discretised L1 distance between a histogram and a probability density.

    Sum over bins of ``|h_density - bin average of rho| * width`` plus the mass
    of ``rho`` outside the histogram range. Out-of-range samples count as
    missing histogram mass, so an empty histogram is at distance 1.
    """
    avg = bin_averages(rho, h.edges)
    inside = float(np.sum(np.abs(h.density() - avg)) * h.width)
    outside = max(0.0, total_mass(rho) - mass_inside(rho, h.lo, h.hi))
    return inside + outside


def histogram_l1(h1: Histogram, h2: Histogram) -> float:
    """L1 distance between two histograms on the same layout."""
    if (h1.lo, h1.hi, h1.bins) != (h2.lo, h2.hi, h2.bins):
        raise ValueError("histograms have different bin layouts")
    d = float(np.sum(np.abs(h1.density() - h2.density())) * h1.width)
    # out-of-range mass is compared as one extra cell
    n1, n2 = max(h1.total, 1), max(h2.total, 1)
    d += abs((h1.underflow + h1.overflow) / n1 - (h2.underflow + h2.overflow) / n2)
    return d


@dataclass
class TailFit:
    """Power-law fit ``rho ~ C |x|^p`` on the tail window."""

    exponent: float
    coefficient: float
    coefficient_fixed: float
    exponent_stderr: float
    points: int
    applicable: bool
    diagnostics: dict = field(default_factory=dict)


def tail_fit(h: Histogram, x_min: float = 5.0, x_max: Optional[float] = None,
             min_points: int = 4) -> TailFit:
    """Least-squares fit of ``log rho`` against ``log|x|`` over ``x_min <= |x| <= x_max``.

    Both tails are pooled. ``coefficient`` comes from the free fit;
    ``coefficient_fixed`` is the weighted estimate of ``C`` with the exponent
    held at ``-2``. Bins with no samples are dropped; with fewer than
    ``min_points`` occupied bins the fit is flagged not applicable.
    """
    x_max = max(abs(h.lo), abs(h.hi)) if x_max is None else x_max
    c = h.centers
    dens = h.density()
    sel = (np.abs(c) >= x_min) & (np.abs(c) <= x_max) & (h.counts > 0)
    npts = int(sel.sum())
    if npts < min_points:
        return TailFit(math.nan, math.nan, math.nan, math.nan, npts, False,
                       {"reason": "too few occupied bins in the tail window"})
    lx = np.log(np.abs(c[sel]))
    ly = np.log(dens[sel])
    # Poisson weights: var(log count) ~ 1/count
    w = h.counts[sel].astype(float)
    A = np.vstack([lx, np.ones_like(lx)]).T
    Aw = A * np.sqrt(w)[:, None]
    yw = ly * np.sqrt(w)
    coef, res, rank, _ = np.linalg.lstsq(Aw, yw, rcond=None)
    p, logc = coef
    dof = max(npts - 2, 1)
    resid = yw - Aw @ coef
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(Aw.T @ Aw)
    # fixed exponent -2: C = sum(w * rho x^2) / sum(w), with each x^2 rho weighted by counts
    x2rho = dens[sel] * c[sel] ** 2
    c_fixed = float(np.sum(w * x2rho) / np.sum(w))
    samples = int(h.counts[sel].sum())
    return TailFit(float(p), float(math.exp(logc)), c_fixed, float(math.sqrt(cov[0, 0])), npts,
                   True, {"tail_samples": samples, "reduced_chi2": s2})


def edge_exponent_fit(rho: DensitySpec, edge: float, side: int = 1,
                      s_min: float = 1e-6, s_max: float = 1e-2, points: int = 25):
    """Log-log slope of ``rho(edge + side*s)`` for ``s`` in ``[s_min, s_max]``.

    ``side=+1`` probes inside a lower edge, ``side=-1`` inside an upper edge.
    Returns ``(slope, max_abs_residual)``; a large residual flags a window
    where the density is not a clean power law.
    """
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    s = np.logspace(math.log10(s_min), math.log10(s_max), points)
    vals = np.asarray([float(rho(edge + side * si)) for si in s])
    if np.any(vals <= 0):
        raise ValueError("density vanishes inside the fit window: wrong edge or side")
    ls, lv = np.log(s), np.log(vals)
    A = np.vstack([ls, np.ones_like(ls)]).T
    coef, *_ = np.linalg.lstsq(A, lv, rcond=None)
    return float(coef[0]), float(np.max(np.abs(A @ coef - lv)))


def report(metric: str, value: float, tolerance: float, passed: Optional[bool] = None) -> dict:
    """JSON-ready comparison record; ``pass`` defaults to ``value < tolerance``."""
    if passed is None:
        passed = bool(value < tolerance)
    return {"metric": metric, "value": float(value), "tolerance": float(tolerance), "pass": bool(passed)}


def normalization_audit(rho: DensitySpec) -> float:
    """``|int rho - 1|``."""
    return abs(total_mass(rho) - 1.0)
