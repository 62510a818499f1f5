"""Time evolution of the spectral Stieltjes transform for the cubic model.

``G(z, t)`` solves ``dG/dt = d/dz [beta/4 G^2 + (z^2 - a) G + z]``. With
``H = G + (2/beta)(z^2 - a)`` the solution is transported along characteristics
``z'(t) = -(beta/2) H(z(t), t)``, which obey the explicit second-order system

    z'' = 2 z (z^2 - a) - beta/2,    z(0) = z0,   z'(0) = -(beta/2) H(z0, 0),

and ``H(z(t), t) = -(2/beta) z'(t)``. Reading ``G(omega, T)`` therefore means
finding the start point ``z0`` whose characteristic reaches ``omega`` at ``T``.

For long horizons the map ``z0 -> z(T)`` is exponentially sensitive: the
characteristics linger near the saddle ``z = zeta`` of the second-order system.
The boundary value problem is therefore solved by multiple shooting. The node
states ``(z, z')`` at anchor times at most ``ANCHOR`` apart are unknowns matched
by Newton's method, and the horizon is grown by continuation from ``T = 0``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .model import CubicModel
from .stieltjes import DensitySpec, pv_integral

#: halt a forward integration when a characteristic gets this close to the real axis
IMAG_FLOOR = 1e-6
#: longest segment between two shooting nodes
ANCHOR = 0.5
#: largest RK4 step, and the step budget per unit of local rate sqrt|6 z^2 - 2a|
H_MAX = 0.005
RATE_STEP = 0.02
#: largest rate-weighted segment length (a segment of ANCHOR at |z| ~ 1)
COST_MAX = ANCHOR * (1.0 + math.sqrt(6.0))


#: moderate targets: |omega|^2 / Im omega stays small, so characteristics stay short
DEFAULT_TARGETS = tuple(complex(x, y) for y in (0.75, 1.5) for x in (-1.5, -0.75, 0.0, 0.75, 1.5))


class ShootingWarning(RuntimeWarning):
    """Some targets could not be reached; their values are partial."""


@dataclass
class GridField:
    """Values of ``G(., t)`` at a fixed set of upper half-plane points."""

    points: np.ndarray
    values: np.ndarray
    time: float
    converged: Optional[np.ndarray] = None
    start_points: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex)
        self.values = np.asarray(self.values, dtype=complex)
        if np.any(self.points.imag <= 0):
            raise ValueError("GridField points must lie in the open upper half-plane")
        if self.converged is None:
            self.converged = np.ones(self.points.shape, dtype=bool)


@dataclass
class Characteristic:
    """A sampled characteristic ``t -> (z(t), z'(t))``."""

    z0: complex
    t: np.ndarray
    z: np.ndarray
    dz: np.ndarray
    halted: bool = False
    beta: float = 1.0

    @property
    def H(self) -> np.ndarray:
        return -(2.0 / self.beta) * self.dz


def h_from_g(G, z, m: CubicModel):
    """``H = G + (2/beta)(z^2 - a)``."""
    return G + (2.0 / m.beta) * (z * z - m.a)


def g_from_h(H, z, m: CubicModel):
    return H - (2.0 / m.beta) * (z * z - m.a)


def delta_initial(z):
    """Stieltjes transform of a unit point mass at the origin."""
    return -1.0 / np.asarray(z, dtype=complex)


def j_function(G, z, m: CubicModel):
    """``J = (beta/4) G^2 + (z^2 - a) G + z``, constant along characteristics."""
    return 0.25 * m.beta * G * G + (z * z - m.a) * G + z


def g_from_invariant(J, z, dz, m: CubicModel):
    """Solve ``j_function(G, z) = J`` for ``G`` on the branch selected by ``z'``.

    The two roots have ``H = +-(2/beta) sqrt((z^2-a)^2 - beta (z - J))``; the one
    with ``H`` closest to ``-(2/beta) z'`` is returned, in a cancellation-free
    form (``G`` is small where ``H`` and ``(2/beta)(z^2-a)`` are large).
    """
    beta = m.beta
    J = np.asarray(J, dtype=complex)
    z = np.asarray(z, dtype=complex)
    w = z * z - m.a
    delta = -beta * (z - J)
    root = np.sqrt(w * w + delta)
    h_char = -np.asarray(dz, dtype=complex)
    root = np.where(np.abs(root - h_char) <= np.abs(root + h_char), root, -root)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (2.0 / beta) * (root - w)
        stable = (2.0 / beta) * delta / (root + w)
    return np.where(np.abs(root + w) > np.abs(root - w), stable, direct)


def _holo_derivative(f: Callable, z, h=1e-6):
    z = np.asarray(z, dtype=complex)
    step = h * (1.0 + np.abs(z))
    return (np.asarray(f(z + step)) - np.asarray(f(z - step))) / (2.0 * step)


def _accel(z, a, beta):
    return 2.0 * z * (z * z - a) - 0.5 * beta


def _rk4(z, v, dt, nsteps, a, beta):
    """Plain RK4 for ``(z, v)``; ``dt`` broadcasts against ``z``."""
    for _ in range(nsteps):
        k1z, k1v = v, _accel(z, a, beta)
        k2z, k2v = v + 0.5 * dt * k1v, _accel(z + 0.5 * dt * k1z, a, beta)
        k3z, k3v = v + 0.5 * dt * k2v, _accel(z + 0.5 * dt * k2z, a, beta)
        k4z, k4v = v + dt * k3v, _accel(z + dt * k3z, a, beta)
        z = z + dt / 6.0 * (k1z + 2 * k2z + 2 * k3z + k4z)
        v = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return z, v


def _rk4_variational(z, v, dt, nsteps, a, beta):
    """RK4 for ``(z, v)`` plus the 2x2 sensitivity to the start state.

    Returns ``z, v, (Zz, Vz, Zv, Vv), min_imag`` where ``Zz = dz/dz0`` etc.
    """
    Zz = np.ones_like(z)
    Vz = np.zeros_like(z)
    Zv = np.zeros_like(z)
    Vv = np.ones_like(z)
    min_im = z.imag.copy()

    def f(z, v, Zz, Vz, Zv, Vv):
        k = 6.0 * z * z - 2.0 * a
        return v, _accel(z, a, beta), Vz, k * Zz, Vv, k * Zv

    s = (z, v, Zz, Vz, Zv, Vv)
    for _ in range(nsteps):
        k1 = f(*s)
        k2 = f(*[x + 0.5 * dt * k for x, k in zip(s, k1)])
        k3 = f(*[x + 0.5 * dt * k for x, k in zip(s, k2)])
        k4 = f(*[x + dt * k for x, k in zip(s, k3)])
        s = tuple(x + dt / 6.0 * (p + 2 * q + 2 * r + w) for x, p, q, r, w in zip(s, k1, k2, k3, k4))
        np.fmin(min_im, s[0].imag, out=min_im)
    z, v, Zz, Vz, Zv, Vv = s
    return z, v, (Zz, Vz, Zv, Vv), min_im


def _rate(z_abs, a):
    return np.sqrt(np.abs(6.0 * z_abs * z_abs - 2.0 * a)) + 1.0


def _step_count(lengths, rates):
    """Common RK4 step count so that every segment has ``h <= H_MAX`` and
    ``h * rate <= RATE_STEP``."""
    need = np.maximum(lengths / H_MAX, lengths * rates / RATE_STEP)
    n = np.ceil(np.max(need))
    if not np.isfinite(n):
        return 1
    return int(max(1, min(n, 1_000_000)))


def integrate_characteristic(z0: complex, G0: Callable, m: CubicModel, T: float,
                             dt: float = 1e-3, record_every: int = 1,
                             imag_floor: float = IMAG_FLOOR) -> Characteristic:
    """Forward RK4 integration of the characteristic started at ``z0``.

    Stops early with ``halted=True`` if the path comes within ``imag_floor``
    of the real axis; the partial trajectory is kept.
    """
    z0 = complex(z0)
    if not z0.imag > 0:
        raise ValueError("z0 must lie in the upper half-plane")
    a, beta = m.a, m.beta
    z = z0
    v = -(beta / 2.0) * complex(h_from_g(complex(G0(z0)), z0, m))
    n = int(round(T / dt))
    ts, zs, vs = [0.0], [z], [v]
    halted = False
    for i in range(1, n + 1):
        z, v = _rk4(z, v, dt, 1, a, beta)
        if not (z.imag >= imag_floor and math.isfinite(abs(z))):
            halted = True
        if halted or i % record_every == 0 or i == n:
            ts.append(i * dt)
            zs.append(z)
            vs.append(v)
        if halted:
            break
    return Characteristic(z0, np.array(ts), np.array(zs), np.array(vs), halted, beta)


@dataclass
class _Nodes:
    """Shooting nodes for a batch of targets: shape (n_targets, K)."""

    Z: np.ndarray
    V: np.ndarray
    lengths: np.ndarray
    omega: np.ndarray

    @property
    def horizon(self) -> float:
        return float(self.lengths.sum())

    def copy(self):
        return _Nodes(self.Z.copy(), self.V.copy(), self.lengths.copy(), self.omega)

    def take(self, keep):
        return _Nodes(self.Z[keep], self.V[keep], self.lengths, self.omega[keep])

    def rates(self, a, Z=None):
        """Per-segment local rate from the larger endpoint modulus (worst target)."""
        Z = self.Z if Z is None else Z
        with np.errstate(all="ignore"):
            ends = np.concatenate([np.abs(Z[:, 1:]), np.abs(self.omega)[:, None]], axis=1)
            big = np.maximum(np.abs(Z), ends)
            big = np.where(np.isfinite(big), big, 1e6)
        return _rate(np.max(big, axis=0), a)


class _Shooter:
    def __init__(self, G0: Callable, m: CubicModel, tol=1e-11, max_iter=50):
        self.G0 = G0
        self.m = m
        self.tol = tol
        self.max_iter = max_iter

    def H0(self, z):
        return h_from_g(np.asarray(self.G0(z), dtype=complex), z, self.m)

    def J0(self, z):
        return j_function(np.asarray(self.G0(z), dtype=complex), z, self.m)

    def dH0(self, z):
        return _holo_derivative(self.G0, z) + (4.0 / self.m.beta) * z

    def steps(self, nodes: _Nodes, Z=None):
        return _step_count(nodes.lengths, nodes.rates(self.m.a, Z))

    def flow(self, nodes: _Nodes, Z=None, V=None, n=None):
        Z = nodes.Z if Z is None else Z
        V = nodes.V if V is None else V
        if n is None:
            n = self.steps(nodes, Z)
        with np.errstate(all="ignore"):
            return _rk4_variational(Z, V, nodes.lengths / n, n, self.m.a, self.m.beta)

    def residual(self, nodes: _Nodes, omega, Z, V, n):
        beta = self.m.beta
        nt, K = Z.shape
        ze, ve, M, mi = self.flow(nodes, Z, V, n)
        r = np.empty((nt, 2 * K), dtype=complex)
        with np.errstate(all="ignore"):
            r[:, 0] = V[:, 0] + 0.5 * beta * self.H0(Z[:, 0])
        r[:, 1:-1:2] = ze[:, :-1] - Z[:, 1:]
        r[:, 2:-1:2] = ve[:, :-1] - V[:, 1:]
        r[:, -1] = ze[:, -1] - omega
        return r, M, mi, ve[:, -1]

    def jacobian(self, Z, M):
        beta = self.m.beta
        nt, K = Z.shape
        n = 2 * K
        Zz, Vz, Zv, Vv = M
        Jm = np.zeros((nt, n, n), dtype=complex)
        Jm[:, 0, 0] = 0.5 * beta * self.dH0(Z[:, 0])
        Jm[:, 0, 1] = 1.0
        k = np.arange(K - 1)
        rz, rv, cz, cv = 1 + 2 * k, 2 + 2 * k, 2 * k, 2 * k + 1
        Jm[:, rz, cz] = Zz[:, :-1]
        Jm[:, rz, cv] = Zv[:, :-1]
        Jm[:, rv, cz] = Vz[:, :-1]
        Jm[:, rv, cv] = Vv[:, :-1]
        Jm[:, rz, cz + 2] = -1.0
        Jm[:, rv, cv + 2] = -1.0
        Jm[:, n - 1, n - 2] = Zz[:, -1]
        Jm[:, n - 1, n - 1] = Zv[:, -1]
        return Jm

    def solve(self, nodes: _Nodes, omega):
        """Damped Newton on all node states. Modifies ``nodes`` in place.

        Returns (converged mask, iteration counts, min Im z on paths, z'(T)).
        """
        Z, V = nodes.Z, nodes.V
        nt = Z.shape[0]
        # the step count stays fixed within one solve so the residual map is smooth
        n = self.steps(nodes)
        r, M, mi, vT = self.residual(nodes, omega, Z, V, n)
        rn = _norms(r)
        done = np.zeros(nt, dtype=bool)
        conv = np.zeros(nt, dtype=bool)
        its = np.zeros(nt, dtype=int)
        for it in range(1, self.max_iter + 1):
            act = ~done & np.isfinite(rn)
            if not act.any():
                break
            Jm = self.jacobian(Z, M)
            Jm[~act] = np.eye(Jm.shape[1])
            rhs = np.where(act[:, None], -r, 0.0)
            with np.errstate(all="ignore"):
                try:
                    dx = np.linalg.solve(Jm, rhs[..., None])[..., 0]
                except np.linalg.LinAlgError:
                    dx = np.stack([np.linalg.lstsq(Jm[i], rhs[i], rcond=None)[0] for i in range(nt)])
            dx[~np.isfinite(dx).all(axis=1)] = 0.0
            lam = np.ones(nt)
            pending = act.copy()
            for _ in range(20):
                Zt = Z + lam[:, None] * dx[:, 0::2]
                Vt = V + lam[:, None] * dx[:, 1::2]
                rt, Mt, mt, vt = self.residual(nodes, omega, Zt, Vt, n)
                rtn = _norms(rt)
                ok = pending & (rtn < (1.0 - 1e-4 * lam) * rn)
                if ok.any():
                    Z[ok], V[ok], r[ok], mi[ok], vT[ok], rn[ok] = Zt[ok], Vt[ok], rt[ok], mt[ok], vt[ok], rtn[ok]
                    for A, B in zip(M, Mt):
                        A[ok] = B[ok]
                    pending &= ~ok
                if not pending.any():
                    break
                lam = np.where(pending, 0.5 * lam, lam)
            its[act] = it
            scale = 1.0 + np.max(np.abs(np.concatenate([Z, V], axis=1)), axis=1)
            step = lam * np.max(np.abs(dx), axis=1)
            newly = act & ~pending & ((step < self.tol * scale) | (rn < 1e-12 * scale))
            # a rejected step at tiny residual is as good as it gets
            stalled = act & pending
            conv |= newly | (stalled & (rn < 1e-9 * scale))
            done |= newly | stalled
        scale = 1.0 + np.max(np.abs(np.concatenate([Z, V], axis=1)), axis=1)
        conv &= rn < 1e-9 * scale
        return conv, its, np.min(mi, axis=1), vT


    def tangent(self, nodes: _Nodes, omega, k: int):
        """Derivative of the node states with respect to the length of segment ``k``.

        Differentiating ``F(x, L_k) = 0`` gives ``J dx/dL_k = -dF/dL_k``; only the
        matching rows of segment ``k`` depend on its length.
        """
        nt, K = nodes.Z.shape
        ze, ve, M, _ = self.flow(nodes)
        Jm = self.jacobian(nodes.Z, M)
        dF = np.zeros((nt, 2 * K), dtype=complex)
        if k < K - 1:
            dF[:, 1 + 2 * k] = ve[:, k]
            dF[:, 2 + 2 * k] = _accel(ze[:, k], self.m.a, self.m.beta)
        else:
            dF[:, -1] = ve[:, k]
        with np.errstate(all="ignore"):
            try:
                dx = np.linalg.solve(Jm, -dF[..., None])[..., 0]
            except np.linalg.LinAlgError:
                return np.zeros_like(nodes.Z), np.zeros_like(nodes.V)
        dx[~np.isfinite(dx).all(axis=1)] = 0.0
        return dx[:, 0::2], dx[:, 1::2]


def _norms(r):
    with np.errstate(all="ignore"):
        n = np.linalg.norm(r, axis=1)
    return np.where(np.isfinite(n), n, np.inf)


def _slowest_segment(nodes: _Nodes) -> int:
    return int(np.argmin(np.max(np.abs(nodes.V), axis=0)))


def _split_long(new: _Nodes, shooter: _Shooter) -> _Nodes:
    """Halve segments until each is at most ``ANCHOR`` long and at most
    ``COST_MAX`` in rate-weighted length. New nodes come from flowing the
    segment start forward, which introduces no mismatch."""
    a = shooter.m.a
    for _ in range(200):
        cost = new.lengths * new.rates(a)
        over = (new.lengths > ANCHOR * (1 + 1e-12)) | (cost > COST_MAX)
        if not over.any():
            break
        j = int(np.argmax(np.where(over, cost, -np.inf)))
        half = 0.5 * new.lengths[j]
        sub = _Nodes(new.Z[:, j:j + 1], new.V[:, j:j + 1], np.array([half]),
                     new.Z[:, j + 1] if j + 1 < new.Z.shape[1] else new.omega)
        zm, vm, _, _ = shooter.flow(sub)
        zm, vm = zm[:, 0], vm[:, 0]
        if not (np.all(np.isfinite(zm)) and np.all(np.isfinite(vm))):
            # fall back to the chord between the neighbouring nodes
            nxt = new.Z[:, j + 1] if j + 1 < new.Z.shape[1] else new.omega
            zm = 0.5 * (new.Z[:, j] + nxt)
            vm = -0.5 * shooter.m.beta * shooter.H0(zm) if j == 0 else new.V[:, j]
        new.Z = np.insert(new.Z, j + 1, zm, axis=1)
        new.V = np.insert(new.V, j + 1, vm, axis=1)
        new.lengths = np.insert(new.lengths, j, half)
        new.lengths[j + 1] = half
    return new


def _extend(nodes: _Nodes, dT: float, shooter: _Shooter, tangent=None) -> _Nodes:
    """Predicted nodes for horizon ``T + dT``.

    The segment that starts at the slowest node is lengthened, since a time
    shift there costs the smallest mismatch, and the nodes move along the
    tangent when one is given.
    """
    new = nodes.copy()
    k = _slowest_segment(new)
    if tangent is not None:
        new.Z = new.Z + dT * tangent[0]
        new.V = new.V + dT * tangent[1]
    new.lengths[k] += dT
    return _split_long(new, shooter)


@dataclass
class Evolution:
    """Result of :func:`evolve_G_series`: one :class:`GridField` per requested time."""

    fields: list
    iterations: list = field(default_factory=list)
    min_imag: list = field(default_factory=list)

    @property
    def final(self) -> GridField:
        return self.fields[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([f.time for f in self.fields])


def evolve_G_series(G0: Callable, m: CubicModel, targets: Sequence[complex],
                    times: Sequence[float], first_step: float = 0.05,
                    min_step: float = 1e-5, max_iter: int = 10,
                    readout: str = "invariant") -> Evolution:
    """``G(omega, t)`` for every target and every ``t`` in ``times`` (ascending).

    ``readout="invariant"`` recovers ``G`` from the conserved ``J`` at the start
    point (accurate even for large ``|omega|``); ``"transport"`` uses
    ``H = -(2/beta) z'(T)`` directly, which exposes the integration error.

    The horizon grows by continuation from ``t = 0``; the step doubles after a
    success (up to ``ANCHOR``) and halves after a failed Newton solve. A target
    that fails even at ``min_step`` is frozen and flagged as not converged.
    """
    omega = np.asarray(targets, dtype=complex).ravel()
    if np.any(omega.imag <= 0):
        raise ValueError("targets must lie in the upper half-plane")
    if readout not in ("invariant", "transport"):
        raise ValueError(f"unknown readout {readout!r}")
    times = [float(t) for t in times]
    if any(t1 < t0 for t0, t1 in zip(times, times[1:])) or (times and times[0] < 0):
        raise ValueError("times must be nonnegative and ascending")
    beta = m.beta
    shooter = _Shooter(G0, m, max_iter=max_iter)
    nt = omega.size
    alive = np.ones(nt, dtype=bool)
    # last good start point and value per target
    vals = np.asarray(G0(omega), dtype=complex).copy()
    z0s = omega.copy()
    fields, iters, mins = [], [], []

    def record(T, it, mi):
        fields.append(GridField(omega, vals.copy(), T, converged=alive.copy(), start_points=z0s.copy()))
        iters.append(int(it))
        mins.append(float(mi))

    nodes = None
    tangent = None
    T = 0.0
    # characteristics near a far target move on the time scale 1/|omega|
    first_step = min(first_step, 0.1 / max(1.0, float(np.max(np.abs(omega)))))
    dT = first_step
    for t_req in times:
        if t_req == 0.0:
            record(0.0, 0, float(np.min(omega.imag)))
            continue
        last_it, last_mi = 0, np.inf
        while T < t_req - 1e-12:
            step = min(dT, t_req - T)
            idx = np.flatnonzero(alive)
            if nodes is None:
                H = shooter.H0(omega[idx])
                z_seed = omega[idx] + 0.5 * beta * step * H
                trial = _split_long(_Nodes(z_seed[:, None].copy(),
                                           (-0.5 * beta * shooter.H0(z_seed))[:, None],
                                           np.array([step]), omega[idx]), shooter)
            else:
                trial = _extend(nodes, step, shooter, tangent)
            conv, its, mi, vT = shooter.solve(trial, omega[idx])
            if conv.all():
                nodes = trial
                tangent = shooter.tangent(nodes, omega[idx], _slowest_segment(nodes))
                T += step
                z0s[idx] = nodes.Z[:, 0]
                if readout == "invariant":
                    vals[idx] = g_from_invariant(shooter.J0(z0s[idx]), omega[idx], vT, m)
                else:
                    vals[idx] = g_from_h(-(2.0 / beta) * vT, omega[idx], m)
                last_it, last_mi = int(its.max()), min(last_mi, float(mi.min()))
                dT = min(ANCHOR, 2.0 * step)
                continue
            if step > min_step:
                dT = 0.5 * step
                continue
            # give up on the failing targets, keep going with the rest
            bad = idx[~conv]
            alive[bad] = False
            warnings.warn(f"shooting failed for {bad.size} target(s) at t={T + step:.4g}",
                          ShootingWarning, stacklevel=2)
            if not alive.any():
                break
            keep = conv
            if nodes is not None:
                nodes = nodes.take(keep)
                tangent = (tangent[0][keep], tangent[1][keep])
            dT = first_step
        if not alive.any():
            T = t_req
        record(t_req, last_it, last_mi)
    return Evolution(fields, iters, mins)


def evolve_G(G0: Callable, m: CubicModel, targets: Sequence[complex], T: float) -> GridField:
    """``G(omega, T)`` at each target, starting from the transform ``G0``."""
    if T < 0:
        raise ValueError("T must be nonnegative")
    return evolve_G_series(G0, m, targets, [T]).final


def stencil_points(centers, h: float) -> np.ndarray:
    """Centers followed by their ``+h`` and ``-h`` real-direction neighbours."""
    c = np.asarray(centers, dtype=complex).ravel()
    return np.concatenate([c, c + h, c - h])


def residual_burgers(fields: Sequence[GridField], m: CubicModel, h: float,
                     scheme: str = "forward") -> float:
    """Largest mismatch between ``dG/dt`` and ``d/dz[beta/4 G^2 + (z^2-a)G + z]``.

    Each field must be laid out as by :func:`stencil_points`. The time
    derivative is the difference quotient between consecutive fields and the
    space derivative a central difference. With ``scheme="forward"`` the space
    side is taken at the earlier time (first order in the time spacing); with
    ``"midpoint"`` it is averaged over both times (second order).
    """
    if scheme not in ("forward", "midpoint"):
        raise ValueError(f"unknown scheme {scheme!r}")

    def rhs(f):
        n = f.points.size // 3
        z, Gv = f.points, f.values
        flux = m.beta / 4.0 * Gv * Gv + (z * z - m.a) * Gv + z
        return (flux[n:2 * n] - flux[2 * n:]) / (2.0 * h)

    worst = 0.0
    for f0, f1 in zip(fields, fields[1:]):
        n = f0.points.size // 3
        dGdt = (f1.values[:n] - f0.values[:n]) / (f1.time - f0.time)
        side = rhs(f0) if scheme == "forward" else 0.5 * (rhs(f0) + rhs(f1))
        worst = max(worst, float(np.max(np.abs(dGdt - side))))
    return worst


def flux_density(rho_t: DensitySpec, lam: float, m: CubicModel) -> float:
    """Probability flux ``rho(lam) * ((beta/2) PV int rho(x)/(x - lam) dx + lam^2 - a)``.

    Positive values mean mass moving right to left.
    """
    r = float(rho_t(lam))
    if r == 0.0:
        return 0.0
    return r * (0.5 * m.beta * pv_integral(rho_t, lam) + lam * lam - m.a)


def mass_defect(G: Callable, y: float = 1e3) -> float:
    """``|-i y G(iy) - 1|``: deviation of the total mass from one."""
    return abs(-1j * y * complex(G(1j * y)) - 1.0)


def shoot_start_point(G0: Callable, m: CubicModel, omega: complex, T: float,
                      seed: complex, tol: float = 1e-13, max_iter: int = 50):
    """Single shooting from an explicit seed: solve ``z(T; z0) = omega`` for ``z0``.

    Only sensible for short horizons. Returns ``(z0, converged)``; used to probe
    whether different seeds land on the same start point.
    """
    beta = m.beta
    shooter = _Shooter(G0, m)
    z0 = complex(seed)
    for _ in range(max_iter):
        v0 = -0.5 * beta * complex(shooter.H0(np.array([z0]))[0])
        nodes = _Nodes(np.array([[z0]]), np.array([[v0]]), np.array([T]), np.array([omega]))
        ze, _, M, _ = shooter.flow(nodes)
        F = complex(ze[0, 0]) - omega
        dv0 = -0.5 * beta * complex(shooter.dH0(np.array([z0]))[0])
        dF = complex(M[0][0, 0]) + complex(M[2][0, 0]) * dv0
        if not math.isfinite(abs(F)) or dF == 0:
            return z0, False
        step = F / dF
        z0 -= step
        if abs(step) < tol * (1 + abs(z0)):
            return z0, True
    return z0, False


def sup_distance(f: GridField, G_ref: Callable) -> float:
    """``max |G(omega, t) - G_ref(omega)|`` over the converged targets."""
    ok = f.converged
    if not ok.any():
        return math.inf
    ref = np.asarray(G_ref(f.points[ok]), dtype=complex)
    return float(np.max(np.abs(f.values[ok] - ref)))
