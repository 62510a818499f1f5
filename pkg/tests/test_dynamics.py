import math
import warnings

import numpy as np
import pytest

from rmnc.dynamics import (DEFAULT_TARGETS, GridField, delta_initial, evolve_G, evolve_G_series,
                           flux_density, g_from_h, h_from_g, integrate_characteristic, j_function,
                           mass_defect, residual_burgers, shoot_start_point, stencil_points,
                           sup_distance)
from rmnc.equilibrium import G, P_cubic, density_spec, quadratic_residual, stationary
from rmnc.model import CubicModel

A0 = CubicModel(0.0, 1.0)
SOL0 = stationary(A0)


def G_stat(z):
    return G(SOL0, z)


def test_h_from_g_examples():
    m = CubicModel(2.0, 1.0)
    assert h_from_g(0.0, math.sqrt(2.0), m) == pytest.approx(0.0, abs=1e-15)
    rng = np.random.default_rng(2)
    z = rng.normal(size=50) + 1j * rng.uniform(0.1, 2, 50)
    g = rng.normal(size=50) + 1j * rng.normal(size=50)
    assert np.array_equal(g_from_h(h_from_g(g, z, m), z, m), g) or \
        np.allclose(g_from_h(h_from_g(g, z, m), z, m), g, rtol=0, atol=1e-14)


def test_stationary_h_squares_to_p():
    rng = np.random.default_rng(4)
    z = rng.uniform(-3, 3, 100) + 1j * rng.uniform(0.01, 3, 100)
    for m in (A0, CubicModel(-1.0, 2.0), CubicModel(1.5)):
        sol = stationary(m)
        H = h_from_g(G(sol, z), z, m)
        np.testing.assert_allclose(H * H, (4 / m.beta**2) * P_cubic(z, sol), rtol=1e-10, atol=1e-10)


def test_stationary_characteristic_stays_on_branch():
    for z0 in (0.5 + 1.0j, -1.0 + 0.5j, 2.0 + 2.0j):
        ch = integrate_characteristic(z0, G_stat, A0, T=10.0, dt=1e-4, record_every=100)
        # forward characteristics may run into the axis; the last recorded
        # point is the one that crossed the floor
        ok = ch.z.imag >= 1e-6
        assert ok[:-1].all() and (ok[-1] or ch.halted)
        Gs = g_from_h(ch.H[ok], ch.z[ok], A0)
        assert np.max(np.abs(quadratic_residual(SOL0, ch.z[ok], Gs))) < 1e-6
        assert ch.t[ok][-1] > 0.5


def test_delta_start_stays_in_upper_half_plane():
    ch = integrate_characteristic(2j, delta_initial, A0, T=1.0, dt=1e-3)
    assert not ch.halted
    assert np.all(ch.z.imag > 0)
    assert ch.t[-1] == pytest.approx(1.0)
    # J is conserved along the path
    Jv = j_function(g_from_h(ch.H, ch.z, A0), ch.z, A0)
    assert np.max(np.abs(Jv - Jv[0])) < 1e-9


def test_rk4_order():
    ref = integrate_characteristic(2j, delta_initial, A0, T=1.0, dt=1e-4).z[-1]
    e1 = abs(integrate_characteristic(2j, delta_initial, A0, T=1.0, dt=0.02).z[-1] - ref)
    e2 = abs(integrate_characteristic(2j, delta_initial, A0, T=1.0, dt=0.01).z[-1] - ref)
    assert 12 < e1 / e2 < 20


def test_characteristic_halts_at_axis():
    ch = integrate_characteristic(0.1 + 0.01j, delta_initial, A0, T=5.0, dt=1e-3, imag_floor=1e-3)
    assert ch.halted
    with pytest.raises(ValueError):
        integrate_characteristic(1.0, delta_initial, A0, T=1.0)


def test_gridfield_rejects_real_points():
    with pytest.raises(ValueError):
        GridField([1.0 + 0j], [0j], 0.0)


def test_evolve_identity_at_zero():
    f = evolve_G(delta_initial, A0, DEFAULT_TARGETS, 0.0)
    np.testing.assert_array_equal(f.values, delta_initial(np.array(DEFAULT_TARGETS)))


@pytest.mark.parametrize("m", [A0, CubicModel(1.5), CubicModel(-0.5, 2.0)], ids=str)
def test_stationary_data_is_stationary(m):
    sol = stationary(m)
    ev = evolve_G_series(lambda z: G(sol, z), m, DEFAULT_TARGETS, [1.0, 5.0, 10.0])
    for f in ev.fields:
        assert f.converged.all()
        assert sup_distance(f, lambda z: G(sol, z)) < 1e-6


def test_stationary_transport_readout():
    ev = evolve_G_series(G_stat, A0, DEFAULT_TARGETS, [10.0], readout="transport")
    assert sup_distance(ev.final, G_stat) < 1e-6


def test_delta_start_converges():
    times = [0.0, 1.0, 5.0, 20.0, 50.0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ev = evolve_G_series(delta_initial, A0, DEFAULT_TARGETS, times)
    d = [sup_distance(f, G_stat) for f in ev.fields]
    assert all(f.converged.all() for f in ev.fields)
    assert d[-1] < 1e-3
    assert d[1] > d[2] > d[3] > d[4]
    for f in ev.fields:
        assert np.min(f.values.imag) >= -1e-8
    # total mass, probed at a far target on the imaginary axis
    far = evolve_G_series(delta_initial, A0, [1e3j], [1.0, 5.0])
    for f in far.fields:
        assert mass_defect(lambda z: f.values[0]) < 1e-3


def test_residual_stationary():
    h = 1e-3
    pts = stencil_points(DEFAULT_TARGETS, h)
    fields = [GridField(pts, G_stat(pts), t) for t in (0.0, 1e-3, 2e-3)]
    assert residual_burgers(fields, A0, h) < 1e-8


def _transient(dt, h=1e-3, t=1.0):
    pts = stencil_points(DEFAULT_TARGETS, h)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return evolve_G_series(delta_initial, A0, pts, [t, t + dt]).fields


def test_residual_transient_first_order():
    r1 = residual_burgers(_transient(1e-3), A0, 1e-3)
    r2 = residual_burgers(_transient(2e-3), A0, 1e-3)
    assert 1.7 < r2 / r1 < 2.3
    assert residual_burgers(_transient(1e-3), A0, 1e-3, scheme="midpoint") < 1e-4


@pytest.mark.xfail(strict=True, reason="a one-sided time difference over dt=1e-3 carries an O(dt |G_tt|) ~ 6e-4 error at t=1")
def test_residual_transient_forward_difference_budget():
    assert residual_burgers(_transient(1e-3), A0, 1e-3) < 1e-4


def test_flux_density_stationary():
    spec = density_spec(SOL0)
    ref = SOL0.J.imag / math.pi
    assert flux_density(spec, 0.0, A0) == pytest.approx(0.13025, abs=5e-5)
    vals = [flux_density(spec, lam, A0) for lam in (-5.0, -1.0, 0.0, 1.0, 5.0)]
    assert min(vals) > 0
    assert max(abs(v - ref) for v in vals) < 1e-3


def test_flux_density_supercritical():
    m = CubicModel(1.5)
    sol = stationary(m)
    spec = density_spec(sol)
    lo, hi = sol.support
    for lam in np.linspace(lo, hi, 7)[1:-1]:
        assert abs(flux_density(spec, lam, m)) < 2e-3
    assert flux_density(spec, hi + 0.5, m) == 0.0


def test_uniqueness_of_start_point():
    omega = 0.5 + 1.0j
    T = 0.3
    z_a, ok_a = shoot_start_point(delta_initial, A0, omega, T, seed=omega)
    z_b, ok_b = shoot_start_point(delta_initial, A0, omega, T, seed=omega + 0.2 - 0.1j)
    assert ok_a and ok_b
    assert abs(z_a - z_b) < 1e-8
    f = evolve_G(delta_initial, A0, [omega], T)
    assert abs(f.start_points[0] - z_a) < 1e-8


def test_evolve_rejects_bad_input():
    with pytest.raises(ValueError):
        evolve_G_series(delta_initial, A0, [1.0 + 0j], [1.0])
    with pytest.raises(ValueError):
        evolve_G_series(delta_initial, A0, [1j], [2.0, 1.0])
    with pytest.raises(ValueError):
        evolve_G(delta_initial, A0, [1j], -1.0)
