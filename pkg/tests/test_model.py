import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rmnc.cubicsolve import solve_cubic, DOUBLE_REAL
from rmnc.model import (CubicModel, QuarticModel, barrier_height, critical_a, critical_g,
                        drift_cubic, drift_quartic, potential_cubic, potential_quartic)


def test_potential_cubic_values():
    assert potential_cubic(0.0, CubicModel(3.7)) == 0.0
    assert potential_cubic(1.0, CubicModel(1.0)) == pytest.approx(-2.0 / 3.0, abs=1e-15)


def test_barrier_height():
    m = CubicModel(2.0 / 3.0)
    assert barrier_height(m) == pytest.approx(4.0 / 3.0 * (2.0 / 3.0) ** 1.5, rel=1e-14)
    assert barrier_height(m) == pytest.approx(0.725775, abs=5e-6)
    assert barrier_height(CubicModel(-1.0)) == 0.0


def test_drift_cubic_values():
    a = 0.81
    assert drift_cubic(math.sqrt(a), CubicModel(a)) == pytest.approx(0.0, abs=1e-15)
    assert drift_cubic(0.0, CubicModel(1.0 / 3.0)) == pytest.approx(1.0 / 3.0)
    assert drift_cubic(-10.0, CubicModel(0.0)) == -100.0


def test_quartic_potential_and_drift():
    assert potential_quartic(0.0, QuarticModel(-0.1)) == 0.0
    assert potential_quartic(1.0, QuarticModel(-1.0 / 48.0)) == pytest.approx(23.0 / 48.0, abs=1e-15)
    assert drift_quartic(0.0, QuarticModel(-0.3)) == 0.0
    assert drift_quartic(1.0, QuarticModel(-1.0 / 6.0)) == pytest.approx(-1.0 / 6.0, abs=1e-15)
    g = -0.07
    top = math.sqrt(-1.0 / (4.0 * g))
    m = QuarticModel(g)
    assert drift_quartic(top, m) == pytest.approx(0.0, abs=1e-14)
    assert drift_quartic(-top, m) == pytest.approx(0.0, abs=1e-14)
    # hills: the potential is locally maximal there
    for x in (top, -top):
        assert potential_quartic(x, m) > potential_quartic(x + 1e-3, m)
        assert potential_quartic(x, m) > potential_quartic(x - 1e-3, m)


def test_critical_values():
    assert critical_a(1.0) == 0.75
    assert critical_a(8.0) == pytest.approx(3.0, rel=1e-15)
    assert critical_a(2.0) == pytest.approx(1.19055, abs=5e-6)
    assert critical_g(2.0) == -1.0 / 48.0
    assert critical_g(1.0) == -1.0 / 24.0
    assert critical_g(1.0 / 24.0) == pytest.approx(-1.0)


def test_thresholds_track_parameters():
    m = CubicModel(0.1, 8.0)
    assert m.a_star == pytest.approx(3.0)
    assert QuarticModel(-0.01, 2.0).g_c == -1.0 / 48.0


def test_beta_must_be_positive():
    with pytest.raises(ValueError):
        CubicModel(0.0, 0.0)
    with pytest.raises(ValueError):
        QuarticModel(-0.01, -1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5), st.floats(-3, 3))
def test_drift_is_minus_gradient_cubic(x, a):
    m = CubicModel(a)
    h = 1e-5
    fd = -(potential_cubic(x + h, m) - potential_cubic(x - h, m)) / (2 * h)
    assert fd == pytest.approx(drift_cubic(x, m), rel=1e-6, abs=1e-6)


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5), st.floats(-0.2, 0.2))
def test_drift_is_minus_half_gradient_quartic(x, g):
    # the quartic dynamics uses -U'/2, unlike the cubic one
    m = QuarticModel(g)
    h = 1e-5
    fd = -0.5 * (potential_quartic(x + h, m) - potential_quartic(x - h, m)) / (2 * h)
    assert fd == pytest.approx(drift_quartic(x, m), rel=1e-6, abs=1e-6)


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0, 4.0, 8.0])
def test_critical_a_gives_double_root(beta):
    r = solve_cubic(4.0, 0.0, -4.0 * critical_a(beta), -beta)
    assert r.classification == DOUBLE_REAL


def test_vectorised_evaluation():
    x = np.linspace(-2, 2, 5)
    np.testing.assert_allclose(drift_cubic(x, CubicModel(1.0)), 1.0 - x**2)
