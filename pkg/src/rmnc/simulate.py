"""Finite-N simulation of the eigenvalue process.

Two engines share one output format:

* ``eigen-sde``: Euler-Maruyama on the interacting particle system
  ``dl_i = -V'(l_i) dt + (beta/2N) sum_j dt/(l_i - l_j) + dB_i/sqrt(N)``
* ``matrix``: Euler steps on the symmetric matrix ``H`` itself (``beta = 1``),
  with the spectrum read off by diagonalisation.

Exploding eigenvalues are restarted (cubic: from ``+cutoff``; quartic: from 0)
or removed (kill mode). Crossing counters record the net right-to-left flow
through fixed levels, with restarts counted as one crossing of every level.
"""
from __future__ import annotations

import json
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .analysis import Histogram
from .model import CubicModel, QuarticModel, drift

log = logging.getLogger(__name__)

MODES = ("restart", "kill")
ENGINES = ("eigen-sde", "matrix")

# sub-step when |drift| * dt exceeds this fraction of max(|lambda|, 1)
STIFF_FRACTION = 0.1
GAP_FRACTION = 0.5
MAX_BISECT = 10
MIN_SUBSTEP = 2.0 ** -30
FORCED_SORT_BUDGET = 1e-4
HIST_FLUSH = 2048


class SimulationWarning(RuntimeWarning):
    pass


@dataclass
class SimConfig:
    N: int
    model: object
    dt: float = 1e-3
    t_end: float = 100.0
    burn_in: float = 10.0
    cutoff: float = 1e3
    seed: int = 0
    mode: str = "restart"
    engine: str = "eigen-sde"
    flux_levels: tuple = (0.0,)
    bins: tuple = (-6.0, 6.0, 400)
    noise: bool = True
    init: Optional[tuple] = None
    eigensolver: str = "lapack"
    track_every: int = 0
    alive_every: int = 100

    def __post_init__(self):
        self.flux_levels = tuple(float(x) for x in self.flux_levels)
        lo, hi, nb = self.bins
        self.bins = (float(lo), float(hi), int(nb))
        if self.init is not None:
            self.init = tuple(float(x) for x in self.init)

    def validate(self) -> List[str]:
        """Raise ``ValueError`` on an unusable configuration; return soft warnings."""
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if not isinstance(self.model, (CubicModel, QuarticModel)):
            raise ValueError("model must be a CubicModel or QuarticModel")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if not self.burn_in < self.t_end:
            raise ValueError("burn_in must be smaller than t_end")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")
        if not self.cutoff > 0:
            raise ValueError("cutoff must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")
        if self.eigensolver not in ("lapack", "jacobi"):
            raise ValueError("eigensolver must be 'lapack' or 'jacobi'")
        lo, hi, nb = self.bins
        if not hi > lo or nb < 1:
            raise ValueError("histogram bins need hi > lo and a positive count")
        if self.init is not None:
            x = np.asarray(self.init)
            if x.size != self.N or np.any(np.diff(x) <= 0):
                raise ValueError("init must be N strictly increasing values")
        if self.engine == "matrix":
            if self.model.beta != 1.0:
                raise ValueError("the matrix engine is real symmetric: beta must be 1")
            if self.mode == "kill":
                raise ValueError("kill mode is only available with the eigen-sde engine")
            if self.init is not None:
                raise ValueError("the matrix engine always starts from H = 0")
        notes = []
        if self.model.beta < 1.0:
            notes.append("beta < 1: eigenvalue collisions are possible and ordering fixes may be frequent")
        if self.cutoff < 50.0:
            notes.append("cutoff below 50 is close to the bulk; restart truncation error may be visible")
        return notes

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = {"family": self.model.family, **asdict(self.model)}
        d["flux_levels"] = list(self.flux_levels)
        d["bins"] = list(self.bins)
        d["init"] = None if self.init is None else list(self.init)
        return d


@dataclass
class SimState:
    lambdas: np.ndarray
    levels: np.ndarray
    crossings: np.ndarray
    rng: np.random.Generator
    time: float = 0.0
    explosions: int = 0
    alive: int = 0
    steps: int = 0
    retries: int = 0
    forced_sorts: int = 0
    alive_series: list = field(default_factory=list)
    paths: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


@dataclass
class FluxRecord:
    level: float
    t_lo: float
    t_hi: float
    signed_crossings: int
    restarts_counted: int

    @property
    def rate(self) -> float:
        return self.signed_crossings / (self.t_hi - self.t_lo)


def make_rng(seed: int, replica: Optional[int] = None) -> np.random.Generator:
    if replica is None:
        return np.random.default_rng(np.random.SeedSequence(int(seed)))
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(replica)]))


def initial_state(cfg: SimConfig, rng: Optional[np.random.Generator] = None) -> SimState:
    if cfg.init is not None:
        lam = np.array(cfg.init, dtype=float)
    else:
        lam = np.arange(cfg.N, dtype=float) * 1e-8
    levels = np.asarray(cfg.flux_levels, dtype=float)
    return SimState(lam, levels, np.zeros(levels.size, dtype=np.int64),
                    rng if rng is not None else make_rng(cfg.seed), alive=cfg.N)


def _n_left(lam, levels):
    return np.searchsorted(lam, levels, side="left")


def interaction(lam, beta: float, N: int):
    """``(beta/2N) sum_{j != i} 1/(l_i - l_j)``, exact pairwise sum."""
    if lam.size < 2:
        return np.zeros_like(lam)
    d = lam[:, None] - lam[None, :]
    np.fill_diagonal(d, np.inf)
    return (beta / (2.0 * N)) * (1.0 / d).sum(axis=1)


def _exploded(lam, cfg):
    L = cfg.cutoff
    if isinstance(cfg.model, CubicModel):
        return lam < -L
    return np.abs(lam) > L


def _apply_explosions(lam, cfg, rng, levels):
    """Restart or remove exploded particles.

    Returns ``(new_lam, order, events, jump_dn)``: ``order`` maps new indices to
    old ones (restarted particles keep their identity), ``jump_dn`` is the
    change in the number of particles left of each level caused by the jumps.
    """
    bad = _exploded(lam, cfg)
    nbad = int(bad.sum())
    if nbad == 0:
        return lam, None, 0, None
    before = _n_left(lam, levels)
    idx = np.arange(lam.size)
    keep = idx[~bad]
    if cfg.mode == "kill":
        new = lam[keep]
        order = keep
    else:
        L = cfg.cutoff
        if isinstance(cfg.model, CubicModel):
            vals = L * (1.0 + 1e-12 * np.arange(nbad))
        else:
            vals = np.sort(rng.uniform(size=nbad)) * 1e-12 * L
        new = np.concatenate([lam[keep], vals])
        order = np.concatenate([keep, idx[bad]])
        p = np.argsort(new, kind="stable")
        new, order = new[p], order[p]
    jump = _n_left(new, levels) - before
    return new, order, nbad, jump


def _advance(lam, dW, dt, cfg, N, rng, levels):
    """Advance by ``dt`` with the Brownian increment ``dW`` spread linearly.

    Without sub-steps this is exactly Euler-Maruyama. Sub-steps are taken
    when the drift is stiff (explosions, restarts) or when neighbours would
    close more than half their gap, so the step resolves the repulsion that
    keeps the particles apart. Returns ``None`` if strict ordering is lost,
    else ``(lam, order, events, jump_dn, substeps)``.
    """
    m, beta = cfg.model, cfg.model.beta
    scale = 1.0 / math.sqrt(N)
    order = np.arange(lam.size)
    events = 0
    jump = np.zeros(levels.size, dtype=np.int64)
    remaining = dt
    subs = 0
    while remaining > 0:
        f = drift(lam, m) + interaction(lam, beta, N)
        room = STIFF_FRACTION * np.maximum(np.abs(lam), 1.0)
        rate = np.max(np.abs(f) / room) if lam.size else 0.0
        v = f + dW * (scale / dt)
        if lam.size > 1:
            # neighbours may close at most GAP_FRACTION of their gap per sub-step
            rate = max(rate, np.max(np.maximum(v[:-1] - v[1:], 0.0) / (GAP_FRACTION * np.diff(lam))))
        h = remaining if rate * remaining <= 1.0 else max(1.0 / rate, dt * MIN_SUBSTEP)
        h = min(h, remaining)
        lam = lam + v * h
        remaining = remaining - h if h < remaining else 0.0
        subs += 1
        if lam.size > 1 and not np.all(np.diff(lam) > 0):
            return None
        new, o, ev, jd = _apply_explosions(lam, cfg, rng, levels)
        if ev:
            lam, dW = new, dW[o]
            order = order[o]
            events += ev
            jump += jd
    return lam, order, events, jump, subs


def handle_explosions(s: SimState, cfg: SimConfig) -> SimState:
    """Apply the restart or kill protocol to the current configuration."""
    new, order, ev, jd = _apply_explosions(s.lambdas, cfg, s.rng, s.levels)
    if ev:
        s.lambdas = new
        s.explosions += ev
        s.crossings -= jd
        s.alive = new.size
    return s


def _step_rec(s, cfg, lam, dW, dt, depth):
    out = _advance(lam, dW, dt, cfg, cfg.N, s.rng, s.levels)
    if out is not None:
        return out
    if depth >= MAX_BISECT:
        # give up on resolving the collision: take the step and restore order
        lam2, order, ev, jd = lam, np.arange(lam.size), 0, np.zeros(s.levels.size, dtype=np.int64)
        f = drift(lam, cfg.model) + interaction(lam, cfg.model.beta, cfg.N)
        lam2 = np.sort(lam + f * dt + dW / math.sqrt(cfg.N))
        for i in range(1, lam2.size):
            if lam2[i] <= lam2[i - 1]:
                lam2[i] = np.nextafter(lam2[i - 1], np.inf)
        s.forced_sorts += 1
        log.warning("forced ordering at t=%.6g", s.time)
        new, o, e2, j2 = _apply_explosions(lam2, cfg, s.rng, s.levels)
        if e2:
            return new, order[o], e2, j2, 1
        return lam2, order, ev, jd, 1
    s.retries += 1
    # Brownian bridge midpoint
    half = 0.5 * dt
    dW1 = 0.5 * dW + 0.5 * math.sqrt(dt) * s.rng.standard_normal(lam.size)
    dW2 = dW - dW1
    l1, o1, e1, j1, n1 = _step_rec(s, cfg, lam, dW1, half, depth + 1)
    l2, o2, e2, j2, n2 = _step_rec(s, cfg, l1, dW2[o1], half, depth + 1)
    return l2, o1[o2], e1 + e2, j1 + j2, n1 + n2


def step_eigen_sde(s: SimState, cfg: SimConfig) -> SimState:
    """One accepted Euler-Maruyama step of length ``cfg.dt`` (in place)."""
    lam = s.lambdas
    n = lam.size
    if cfg.noise and n:
        dW = s.rng.standard_normal(n) * math.sqrt(cfg.dt)
    else:
        dW = np.zeros(n)
    before = _n_left(lam, s.levels)
    new, order, ev, jd, _ = _step_rec(s, cfg, lam, dW, cfg.dt, 0)
    s.crossings += (_n_left(new, s.levels) - before) - jd
    s.explosions += ev
    s.lambdas = new
    s.alive = new.size
    s.steps += 1
    s.time = s.steps * cfg.dt
    return s


class _Accumulator:
    """Buffered histogram filling."""

    def __init__(self, bins):
        self.hist = Histogram.empty(*bins)
        self.buf: list = []
        self.size = 0

    def add(self, x):
        self.buf.append(x.copy())
        self.size += 1
        if self.size >= HIST_FLUSH:
            self.flush()

    def flush(self):
        if self.buf:
            self.hist.add(np.concatenate(self.buf))
            self.buf, self.size = [], 0
        return self.hist


def _records(cfg, s, c0, e0, t_lo):
    out = []
    for k, L in enumerate(s.levels):
        out.append(FluxRecord(float(L), t_lo, s.time, int(s.crossings[k] - c0[k]),
                              int(s.explosions - e0)))
    return out


def _finish(cfg, s):
    if s.steps and s.forced_sorts / s.steps > FORCED_SORT_BUDGET:
        msg = (f"forced ordering on {s.forced_sorts} of {s.steps} steps "
               f"(> {FORCED_SORT_BUDGET:g}); consider a smaller dt")
        s.warnings.append(msg)
        warnings.warn(msg, SimulationWarning, stacklevel=3)


def run_eigen_sde(cfg: SimConfig, rng: Optional[np.random.Generator] = None):
    """Run the particle system; return ``(Histogram, [FluxRecord], SimState)``."""
    notes = cfg.validate()
    if cfg.engine != "eigen-sde":
        raise ValueError("run_eigen_sde needs engine='eigen-sde'")
    s = initial_state(cfg, rng)
    s.warnings.extend(notes)
    acc = _Accumulator(cfg.bins)
    n_steps = int(round(cfg.t_end / cfg.dt))
    k_burn = int(round(cfg.burn_in / cfg.dt))
    c0, e0 = s.crossings.copy(), s.explosions
    t_lo = 0.0
    s.alive_series.append((0.0, s.alive))
    if cfg.track_every:
        s.paths.append((0.0, s.lambdas.copy()))
    for k in range(1, n_steps + 1):
        step_eigen_sde(s, cfg)
        if k == k_burn:
            c0, e0, t_lo = s.crossings.copy(), s.explosions, s.time
        if k > k_burn:
            acc.add(s.lambdas)
        if cfg.alive_every and k % cfg.alive_every == 0:
            s.alive_series.append((s.time, s.alive))
        if cfg.track_every and k % cfg.track_every == 0:
            s.paths.append((s.time, s.lambdas.copy()))
        if s.alive == 0:
            break
    if k_burn == 0:
        t_lo = 0.0
    _finish(cfg, s)
    return acc.flush(), _records(cfg, s, c0, e0, t_lo), s


def hermitian_bm_increment(n: int, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Real symmetric Gaussian increment: diagonal variance ``dt``, off-diagonal ``dt/2``."""
    A = rng.standard_normal((n, n))
    return (A + A.T) * (0.5 * math.sqrt(dt))


class EigenConvergenceError(RuntimeError):
    pass


def sym_eigen(A, max_sweeps: int = 100, tol: float = 1e-14):
    """Cyclic Jacobi eigendecomposition of a real symmetric matrix.

    Returns ascending eigenvalues and an orthonormal matrix ``Q`` with
    ``A = Q diag(w) Q^T``.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("square matrix required")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(np.abs(A).max(), 1e-300)):
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    Q = np.eye(n)
    scale = np.abs(A).max()
    if n < 2 or scale == 0:
        w = np.diag(A).copy()
        p = np.argsort(w)
        return w[p], Q[:, p]
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                sn = t * c
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - sn * aq
                A[:, q] = sn * ap + c * aq
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - sn * rq
                A[q, :] = sn * rp + c * rq
                A[p, q] = A[q, p] = 0.0
                qp, qq = Q[:, p].copy(), Q[:, q].copy()
                Q[:, p] = c * qp - sn * qq
                Q[:, q] = sn * qp + c * qq
    else:
        raise EigenConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = np.diag(A).copy()
    p = np.argsort(w)
    return w[p], Q[:, p]


def _eig(H, solver):
    if solver == "jacobi":
        return sym_eigen(H)
    w, Q = np.linalg.eigh(H)
    return w, Q


def _matrix_drift(H, m):
    if isinstance(m, CubicModel):
        return m.a * np.eye(H.shape[0]) - H @ H
    H2 = H @ H
    return -(0.5 * H + 2.0 * m.g * (H2 @ H))


def run_matrix_langevin(cfg: SimConfig, rng: Optional[np.random.Generator] = None):
    """Euler steps on ``H``; return ``(Histogram, [FluxRecord], SimState)``."""
    notes = cfg.validate()
    if cfg.engine != "matrix":
        raise ValueError("run_matrix_langevin needs engine='matrix'")
    N = cfg.N
    m = cfg.model
    rng = rng if rng is not None else make_rng(cfg.seed)
    H = np.zeros((N, N))
    lam = np.zeros(N)
    levels = np.asarray(cfg.flux_levels, dtype=float)
    s = SimState(lam.copy(), levels, np.zeros(levels.size, dtype=np.int64), rng, alive=N)
    s.warnings.extend(notes)
    acc = _Accumulator(cfg.bins)
    n_steps = int(round(cfg.t_end / cfg.dt))
    k_burn = int(round(cfg.burn_in / cfg.dt))
    c0, e0, t_lo = s.crossings.copy(), 0, 0.0
    dt = cfg.dt
    scale = 1.0 / math.sqrt(N)
    if cfg.track_every:
        s.paths.append((0.0, lam.copy()))
    for k in range(1, n_steps + 1):
        dB = hermitian_bm_increment(N, dt, rng) if cfg.noise else np.zeros((N, N))
        before = _n_left(lam, levels)
        jump = np.zeros(levels.size, dtype=np.int64)
        f = drift(lam, m)
        room = STIFF_FRACTION * np.maximum(np.abs(lam), 1.0)
        nsub = max(1, int(math.ceil(np.max(np.abs(f) / room) * dt)))
        h = dt / nsub
        for _ in range(nsub):
            H = H + _matrix_drift(H, m) * h + dB * (scale / nsub)
            H = 0.5 * (H + H.T)
            lam, Q = _eig(H, cfg.eigensolver)
            bad = _exploded(lam, cfg)
            if bad.any():
                nb = int(bad.sum())
                old = _n_left(lam, levels)
                lam = lam.copy()
                if isinstance(m, CubicModel):
                    lam[bad] = cfg.cutoff * (1.0 + 1e-12 * np.arange(nb))
                else:
                    lam[bad] = np.sort(rng.uniform(size=nb)) * 1e-12 * cfg.cutoff
                # same eigenvectors, new eigenvalues
                H = (Q * lam) @ Q.T
                H = 0.5 * (H + H.T)
                p = np.argsort(lam)
                lam = lam[p]
                jump += _n_left(lam, levels) - old
                s.explosions += nb
        s.crossings += (_n_left(lam, levels) - before) - jump
        s.lambdas = lam
        s.steps = k
        s.time = k * dt
        if k == k_burn:
            c0, e0, t_lo = s.crossings.copy(), s.explosions, s.time
        if k > k_burn:
            acc.add(lam)
        if cfg.track_every and k % cfg.track_every == 0:
            s.paths.append((s.time, lam.copy()))
    return acc.flush(), _records(cfg, s, c0, e0, t_lo), s


def run(cfg: SimConfig, rng: Optional[np.random.Generator] = None):
    if cfg.engine == "matrix":
        return run_matrix_langevin(cfg, rng)
    return run_eigen_sde(cfg, rng)


def _run_replica(args):
    cfg, index = args
    h, flux, s = run(cfg, make_rng(cfg.seed, index))
    s.rng = None  # generators do not need to cross the process boundary
    return index, h, flux, s


def merge_flux(groups: Sequence[Sequence[FluxRecord]]) -> List[FluxRecord]:
    """Sum crossing counts and window lengths level by level."""
    out = []
    for recs in zip(*groups):
        span = sum(r.t_hi - r.t_lo for r in recs)
        out.append(FluxRecord(recs[0].level, 0.0, span, sum(r.signed_crossings for r in recs),
                              sum(r.restarts_counted for r in recs)))
    return out


def run_replicas(cfg: SimConfig, replicas: int, jobs: int = 1):
    """Independent replicas with seeds derived from ``(seed, index)``.

    The merged histogram and flux counters do not depend on ``jobs`` or on
    completion order. Flux windows are concatenated, so the merged record
    spans the total observed time.
    """
    if replicas < 1:
        raise ValueError("replicas must be positive")
    cfg.validate()
    work = [(cfg, i) for i in range(replicas)]
    if jobs > 1 and replicas > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, replicas, os.cpu_count() or 1)) as ex:
            results = list(ex.map(_run_replica, work))
    else:
        results = [_run_replica(w) for w in work]
    results.sort(key=lambda r: r[0])
    hist = results[0][1]
    for r in results[1:]:
        hist = hist.merge(r[1])
    return hist, merge_flux([r[2] for r in results]), [r[3] for r in results]


# ---- writers ---------------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_csv(path, header: Sequence[str], rows) -> None:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(fmt(v) for v in r))
    _write_text(path, "\n".join(lines) + "\n")


def write_histogram_csv(path, h: Histogram) -> None:
    e = h.edges
    d = h.density()
    write_csv(path, ("bin_lo", "bin_hi", "count", "density_estimate"),
              ((e[i], e[i + 1], int(h.counts[i]), d[i]) for i in range(h.bins)))


def write_flux_csv(path, records: Sequence[FluxRecord]) -> None:
    write_csv(path, ("level", "t_lo", "t_hi", "signed_crossings", "rate"),
              ((r.level, r.t_lo, r.t_hi, r.signed_crossings, r.rate) for r in records))


def write_paths_csv(path, paths) -> None:
    if not paths:
        write_csv(path, ("t",), [])
        return
    n = max(p[1].size for p in paths)
    header = ["t"] + [f"lambda_{i + 1}" for i in range(n)]
    write_csv(path, header, ([t] + list(v) for t, v in paths))


def dumps_json(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with ``%.17g`` floats; non-finite floats become ``null``."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{dumps_json(str(k))}: {dumps_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        items = [pad + dumps_json(v, indent, _level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(path, obj) -> None:
    _write_text(path, dumps_json(obj) + "\n")
