"""Acceptance checks as machine-readable verdicts (used by ``rmnc verify``).

Each check returns ``{"criterion", "name", "pass", "checks", "seconds"}`` where
``checks`` is a list of ``{metric, value, tolerance, pass}`` records. The
``quick`` scale shortens the Monte Carlo runs; tolerances never change.
"""
from __future__ import annotations

import math
import time
import warnings
from typing import Callable, Optional, Sequence

import numpy as np

from .analysis import edge_exponent_fit, histogram_l1, l1_distance, report
from .dynamics import DEFAULT_TARGETS, delta_initial, evolve_G_series, sup_distance
from .equilibrium import G, density, density_spec, quadratic_residual, stationary
from .model import CubicModel, QuarticModel, critical_a, critical_g
from .simulate import SimConfig, run_eigen_sde, run_matrix_langevin
from .stieltjes import stieltjes_quadrature, total_mass

CUBIC_A = (-1.0, 0.0, 0.75, 1.5)
BETAS = (1.0, 2.0, 4.0)

#: round-off allowance when testing a decreasing series that has hit its floor
MONOTONE_SLACK = 1e-12


def parameter_grid():
    """Models used by the identity, normalisation and round-trip checks."""
    out = [CubicModel(a, b) for b in BETAS for a in CUBIC_A]
    for b in BETAS:
        gc = critical_g(b)
        out += [QuarticModel(gc, b), QuarticModel(gc / 2, b)]
    return out


def _label(m):
    return f"{m.family}(a={m.a:g},beta={m.beta:g})" if m.family == "cubic" else f"quartic(g={m.g:.6g},beta={m.beta:g})"


def upper_half_plane_sample(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random points with ``Re z`` in [-4, 4] and ``Im z`` log-uniform in [1e-2, 4]."""
    return rng.uniform(-4.0, 4.0, n) + 1j * np.exp(rng.uniform(math.log(1e-2), math.log(4.0), n))


def c1_constants(**_):
    checks = []
    m = CubicModel(critical_a(1.0), 1.0)
    sol = stationary(m)
    checks.append(report("|a* - 0.75|", abs(critical_a(1.0) - 0.75), 1e-12))
    checks.append(report("|zeta - (-0.5)|", abs(sol.zeta + 0.5), 1e-12))
    checks.append(report("|J - (-0.75)|", abs(sol.J + 0.75), 1e-12))
    checks.append(report("support error", max(abs(sol.support[0] + 0.5), abs(sol.support[1] - 1.5)), 1e-12))
    q = stationary(QuarticModel(critical_g(2.0), 2.0))
    checks.append(report("|g_c + 1/48|", abs(critical_g(2.0) + 1.0 / 48.0), 1e-12))
    r = 2.0 * math.sqrt(2.0)
    checks.append(report("quartic support error", max(abs(q.support[0] + r), abs(q.support[1] - r)), 1e-12))
    return checks


def c2_identity(seed=1, **_):
    rng = np.random.default_rng(seed)
    z = upper_half_plane_sample(100, rng)
    checks = []
    for m in parameter_grid():
        sol = stationary(m)
        res = float(np.max(np.abs(quadratic_residual(sol, z))))
        checks.append(report(f"quadratic residual {_label(m)}", res, 1e-10))
    return checks


def c3_normalization(**_):
    checks = []
    for m in parameter_grid():
        sol = stationary(m)
        tol = 1e-4 if sol.support is None else 1e-6
        checks.append(report(f"|mass - 1| {_label(m)}", abs(total_mass(density_spec(sol)) - 1.0), tol))
    return checks


def c4_roundtrip(seed=1, **_):
    rng = np.random.default_rng(seed + 1)
    z = rng.uniform(-3.0, 3.0, 20) + 1j * np.exp(rng.uniform(math.log(0.05), math.log(3.0), 20))
    checks = []
    for m in parameter_grid():
        sol = stationary(m)
        spec = density_spec(sol)
        tol = 1e-3 if sol.support is None else 1e-5
        exact = np.asarray(G(sol, z))
        quad = np.array([stieltjes_quadrature(spec, zi) for zi in z])
        checks.append(report(f"max rel error {_label(m)}", float(np.max(np.abs(quad - exact) / np.abs(exact))), tol))
    return checks


def c5_edges(**_):
    checks = []

    def add(name, m, edge, side, target):
        slope, _ = edge_exponent_fit(density_spec(stationary(m)), edge, side)
        checks.append(report(f"{name}: |slope - {target}|", abs(slope - target), 0.02))

    for b in (1.0, 2.0):
        # a = 2 a*, which is a = 3/2 at beta = 1
        m = CubicModel(2.0 * critical_a(b), b)
        sup = stationary(m)
        add(f"supercritical cubic beta={b:g} lower", m, sup.support[0], 1, 0.5)
        add(f"supercritical cubic beta={b:g} upper", m, sup.support[1], -1, 0.5)
        crit = stationary(CubicModel(critical_a(b), b))
        add(f"critical cubic beta={b:g} lower", CubicModel(critical_a(b), b), crit.support[0], 1, 1.5)
        mq = QuarticModel(critical_g(b), b)
        q = stationary(mq)
        add(f"critical quartic beta={b:g} lower", mq, q.support[0], 1, 1.5)
        add(f"critical quartic beta={b:g} upper", mq, q.support[1], -1, 1.5)
        mg = QuarticModel(critical_g(b) / 2, b)
        qg = stationary(mg)
        add(f"supercritical quartic beta={b:g} upper", mg, qg.support[1], -1, 0.5)
    return checks


def c6_tails(**_):
    sol = stationary(CubicModel(0.0, 1.0))
    C = sol.J.imag / math.pi
    checks = [report("|Im J_0/pi - 0.13025|", abs(C - 0.13025), 5e-5)]
    for x in (1e3, -1e3):
        checks.append(report(f"relative error of x^2 rho at x={x:g}", abs(x * x * float(density(sol, x)) / C - 1.0), 0.01))
    return checks


def _sim(m, seed, t_end, cutoff=1e3, N=50, levels=(0.0,)):
    cfg = SimConfig(N=N, model=m, dt=1e-3, t_end=t_end, burn_in=10.0, cutoff=cutoff, seed=seed,
                    flux_levels=levels)
    return run_eigen_sde(cfg)


def c7_8_simulation(scale="quick", seed=1, cache=None, **_):
    t_end = 100.0 if scale == "full" else 40.0
    models = [CubicModel(0.0), CubicModel(0.75), CubicModel(1.5), QuarticModel(-1.0 / 24.0)]
    c7, c8 = [], []
    cache = {} if cache is None else cache
    for m in models:
        rho = density_spec(stationary(m))
        h, flux, _ = _sim(m, seed, t_end, levels=(-2.0, 0.0, 2.0))
        cache[m] = flux
        d1 = l1_distance(h, rho)
        c7.append(report(f"L1 {_label(m)}", d1, 0.1))
        if scale == "full" or m == models[0]:
            h2, _, _ = _sim(m, seed, t_end, cutoff=2e3, levels=(0.0,))
            c7.append(report(f"Lambda doubling |dL1| {_label(m)}", abs(l1_distance(h2, rho) - d1), 0.01))
    ref = 50.0 * stationary(CubicModel(0.0)).J.imag / math.pi
    sub = cache[models[0]]
    r0 = [r for r in sub if r.level == 0.0][0].rate
    c8.append(report("flux at 0 relative to (N/pi) Im J_0", abs(r0 / ref - 1.0), 0.15))
    rates = [r.rate for r in sub]
    c8.append(report("level spread (max-min)/level-0 rate", (max(rates) - min(rates)) / abs(r0), 0.15))
    sup = cache[models[2]]
    c8.append(report("supercritical |rate| / reference", max(abs(r.rate) for r in sup) / ref, 0.05))
    return c7, c8


def c9_pde(**_):
    m = CubicModel(0.0, 1.0)
    sol = stationary(m)
    times = [0.0] + [float(t) for t in range(1, 51)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ev = evolve_G_series(delta_initial, m, DEFAULT_TARGETS, times)
    d = [sup_distance(f, lambda z: G(sol, z)) for f in ev.fields]
    conv = all(f.converged.all() for f in ev.fields)
    after = [dv for t, dv in zip(times, d) if t >= 5.0]
    rise = max(0.0, max(b - a for a, b in zip(after, after[1:])))
    return [report("all targets converged", 0.0 if conv else 1.0, 0.5),
            report("sup distance at T=50", d[-1], 1e-3),
            report("largest increase after T=5", rise, MONOTONE_SLACK, passed=rise <= MONOTONE_SLACK)]


def c10_engines(scale="quick", seed=1, **_):
    t_end = 50.0 if scale == "full" else 30.0
    kw = dict(N=20, model=CubicModel(0.0), dt=1e-3, t_end=t_end, burn_in=10.0, seed=seed)
    h1, _, _ = run_matrix_langevin(SimConfig(engine="matrix", **kw))
    h2, _, _ = run_eigen_sde(SimConfig(**kw))
    return [report("L1(matrix, eigen-sde)", histogram_l1(h1, h2), 0.1)]


def kill_plateau(alive_series, N: int, window_start: float):
    """Mean surviving fraction over ``t >= window_start`` and its spread (in particles)."""
    a = np.array([n for t, n in alive_series if t >= window_start], dtype=float)
    return float(a.mean() / N), float(a.max() - a.min())


def c11_kill(scale="quick", seed=1, **_):
    t_end = 500.0 if scale == "full" else 300.0
    N = 100
    cfg = SimConfig(N=N, model=CubicModel(0.5), dt=1e-3, t_end=t_end, burn_in=0.0, seed=seed,
                    mode="kill", alive_every=1000)
    _, _, s = run_eigen_sde(cfg)
    alpha, spread = kill_plateau(s.alive_series, N, 0.5 * t_end)
    series = [n for _, n in s.alive_series]
    mono = all(b <= a for a, b in zip(series, series[1:]))
    return [report("alive(t) non-increasing", 0.0 if mono else 1.0, 0.5),
            report("plateau spread / N", spread / N, 0.02, passed=spread / N <= 0.02),
            report("|a - (3/4) alpha^(1/3)|", abs(0.5 - 0.75 * alpha ** (1.0 / 3.0)), 0.1)]


NAMES = {
    1: "critical constants", 2: "stationary identity", 3: "normalization",
    4: "Stieltjes round trip", 5: "edge exponents", 6: "heavy tails",
    7: "simulation vs analytics", 8: "stationary flux", 9: "PDE convergence",
    10: "engine cross-validation", 11: "kill-mode metastability",
}


def run_all(scale: str = "quick", seed: int = 1, only: Optional[Sequence[int]] = None,
            progress: Optional[Callable] = None) -> list:
    if scale not in ("quick", "full"):
        raise ValueError("scale must be quick or full")
    wanted = sorted(set(only or NAMES))
    bad = [k for k in wanted if k not in NAMES]
    if bad:
        raise ValueError(f"unknown criteria {bad}")
    simple = {1: c1_constants, 2: c2_identity, 3: c3_normalization, 4: c4_roundtrip,
              5: c5_edges, 6: c6_tails, 9: c9_pde, 10: c10_engines, 11: c11_kill}
    out = []

    def emit(k, checks, secs):
        rec = {"criterion": k, "name": NAMES[k], "pass": all(c["pass"] for c in checks),
               "checks": checks, "seconds": round(secs, 2)}
        out.append(rec)
        if progress:
            progress(rec)

    for k in wanted:
        if k in (7, 8):
            if any(r["criterion"] in (7, 8) for r in out):
                continue
            t0 = time.time()
            c7, c8 = c7_8_simulation(scale=scale, seed=seed)
            secs = time.time() - t0
            if 7 in wanted:
                emit(7, c7, secs)
            if 8 in wanted:
                emit(8, c8, 0.0)
            continue
        t0 = time.time()
        emit(k, simple[k](scale=scale, seed=seed), time.time() - t0)
    out.sort(key=lambda r: r["criterion"])
    return out
