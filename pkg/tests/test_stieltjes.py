import cmath
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rmnc.equilibrium import G, density, density_spec, stationary
from rmnc.model import CubicModel, QuarticModel
from rmnc.stieltjes import (DensitySpec, ExtrapolationWarning, akhiezer_check, branch_sqrt,
                            invert_stieltjes, piecewise_linear_transform, pv_integral, richardson,
                            stieltjes_quadrature, total_mass)


def semicircle_spec(R=2.0):
    f = lambda x: np.where(np.abs(x) < R, 2 * np.sqrt(np.maximum(R * R - np.asarray(x) ** 2, 0)) / (math.pi * R * R), 0.0)
    return DensitySpec(f, ((-R, R),), edge_exponents=((0.5, 0.5),))


def semicircle_G(z):
    # radius 2, cut on [-2, 2]
    return (-z + np.sqrt(z - 2) * np.sqrt(z + 2)) / 2


def test_branch_sqrt_examples():
    assert branch_sqrt(4) == 2
    assert branch_sqrt(-1) == pytest.approx(1j, abs=1e-16)
    assert branch_sqrt(-2j) == pytest.approx(-1 + 1j, abs=1e-15)
    assert np.sqrt(-2j + 0j) == pytest.approx(1 - 1j, abs=1e-15)


def test_branch_sqrt_random():
    rng = np.random.default_rng(0)
    z = rng.normal(size=10_000) * np.exp(rng.uniform(-5, 5, 10_000)) + 1j * rng.normal(size=10_000)
    s = branch_sqrt(z)
    assert np.all(s.imag >= 0)
    assert np.max(np.abs(s * s - z) / np.maximum(np.abs(z), 1e-300)) < 1e-14


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_branch_sqrt_property(x, y):
    z = complex(x, y)
    s = branch_sqrt(z)
    assert s.imag >= 0
    assert abs(s * s - z) <= 1e-14 * max(abs(z), 1e-300)


def test_point_mass_proxy():
    eps = 1e-4
    spec = DensitySpec(lambda x: np.where(np.abs(x) < eps, 0.5 / eps, 0.0), ((-eps, eps),),
                       edge_exponents=((0.0, 0.0),))
    assert stieltjes_quadrature(spec, 1j) == pytest.approx(1j, abs=1e-7)


def test_semicircle_quadrature():
    assert stieltjes_quadrature(semicircle_spec(), 2j) == pytest.approx(semicircle_G(2j), abs=1e-8)
    assert total_mass(semicircle_spec()) == pytest.approx(1.0, abs=1e-12)


def test_critical_cubic_quadrature():
    sol = stationary(CubicModel(0.75))
    assert abs(stieltjes_quadrature(density_spec(sol), 1 + 1j) - G(sol, 1 + 1j)) < 1e-6


def test_quadrature_requires_upper_half_plane():
    with pytest.raises(ValueError):
        stieltjes_quadrature(semicircle_spec(), 1.0)


def test_full_line_tail_correction():
    # Cauchy density has rho ~ 1/(pi x^2) and G(z) = -1/(z + i)
    spec = DensitySpec(lambda x: 1 / (math.pi * (1 + np.asarray(x) ** 2)), None, 1 / math.pi)
    assert total_mass(spec) == pytest.approx(1.0, abs=1e-9)
    for z in (1j, 2 + 0.5j, -3 + 0.1j):
        assert stieltjes_quadrature(spec, z) == pytest.approx(-1 / (z + 1j), abs=1e-8)


def test_inversion_semicircle():
    assert invert_stieltjes(semicircle_G, 0.0) == pytest.approx(1 / math.pi, abs=1e-6)
    assert abs(invert_stieltjes(semicircle_G, 3.0)) < 1e-8


def test_inversion_supercritical_round_trip():
    sol = stationary(CubicModel(1.5))
    lo, hi = sol.support
    xs = np.linspace(lo, hi, 52)[1:-1]
    g = lambda z: G(sol, z)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExtrapolationWarning)
        err = max(abs(invert_stieltjes(g, x, epsilons=(1e-3, 5e-4, 2.5e-4, 1.25e-4)) - density(sol, x)) for x in xs)
    assert err < 1e-6


def test_inversion_flags_singularity():
    # Im G jumps at the edge; extrapolation does not settle there
    with pytest.warns(ExtrapolationWarning):
        invert_stieltjes(lambda z: -1 / (z - 0.0) + 0 * z, 0.0, tol=1e-12)


def test_round_trip_quadrature_inversion():
    # smooth compactly supported bump
    f = lambda x: np.where(np.abs(x) < 1, 15 / 16 * np.maximum(1 - np.asarray(x) ** 2, 0) ** 2, 0.0)
    spec = DensitySpec(f, ((-1.0, 1.0),), edge_exponents=((2.0, 2.0),))
    g = lambda z: stieltjes_quadrature(spec, z)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExtrapolationWarning)
        for x in (-0.6, -0.2, 0.1, 0.5):
            assert invert_stieltjes(g, x) == pytest.approx(float(f(x)), abs=1e-4)


def test_richardson_removes_linear_term():
    h = np.array([0.1, 0.05, 0.025])
    T = richardson(3.0 + 2.0 * h + 5.0 * h**2)
    assert T[2, 2] == pytest.approx(3.0, abs=1e-12)


def test_pv_symmetric_and_semicircle():
    spec = semicircle_spec()
    assert abs(pv_integral(spec, 0.0)) < 1e-10
    # PV int rho/(x - lam) = Re G(lam + i0) = -lam/2 on the support
    assert pv_integral(spec, 1.0) == pytest.approx(-0.5, abs=1e-8)
    for lam in (0.3, 1.2, 1.9):
        assert pv_integral(spec, lam) == pytest.approx(-pv_integral(spec, -lam), abs=1e-10)
    assert pv_integral(spec, 3.0) == pytest.approx(semicircle_G(3.0).real, abs=1e-10)


def test_pv_flux_consistency():
    sol = stationary(CubicModel(0.0))
    spec = density_spec(sol)
    for lam in np.linspace(-2, 2, 10):
        lhs = 0.5 * pv_integral(spec, lam) + lam * lam
        rhs = sol.J.imag / (math.pi * density(sol, lam))
        assert lhs == pytest.approx(rhs, rel=1e-3)


def test_akhiezer():
    assert akhiezer_check(lambda z: -1 / z).passed
    r = akhiezer_check(lambda z: -1 / (2 * z))
    assert not r.passed and r.mass_errors[-1] == pytest.approx(0.5)
    assert akhiezer_check(lambda z: G(stationary(CubicModel(0.0)), z)).passed
    assert akhiezer_check(lambda z: G(stationary(QuarticModel(-1 / 24)), z)).passed


def test_piecewise_linear_transform():
    xs = np.linspace(-2, 2, 2001)
    rho = np.sqrt(np.maximum(4 - xs**2, 0)) / (2 * math.pi)
    g = piecewise_linear_transform(xs, rho)
    assert g.mass == pytest.approx(1.0, abs=1e-4)
    for z in (2j, 1 + 0.5j, -3 + 1j):
        assert g(z) == pytest.approx(semicircle_G(z), abs=1e-4)
    with pytest.raises(ValueError):
        piecewise_linear_transform([0, 1], [1, -1])
    with pytest.raises(ValueError):
        piecewise_linear_transform([1, 0], [1, 1])
