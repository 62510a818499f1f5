import json
import math

import numpy as np
import pytest

from rmnc.analysis import Histogram
from rmnc.model import CubicModel, QuarticModel
from rmnc.simulate import (EigenConvergenceError, FluxRecord, SimConfig, dumps_json, handle_explosions,
                           hermitian_bm_increment, initial_state, interaction, make_rng, merge_flux,
                           run, run_eigen_sde, run_matrix_langevin, run_replicas, step_eigen_sde,
                           sym_eigen, write_flux_csv, write_histogram_csv, write_json, write_paths_csv)


def _cfg(**kw):
    base = dict(N=1, model=CubicModel(0.0), dt=1e-3, t_end=1.0, burn_in=0.0, noise=False)
    base.update(kw)
    return SimConfig(**base)


def test_well_bottom_is_fixed():
    cfg = _cfg(model=CubicModel(1.0, 2.0), init=(1.0,))
    s = initial_state(cfg)
    for _ in range(100):
        step_eigen_sde(s, cfg)
    assert s.lambdas[0] == 1.0


def test_pair_repulsion_is_symmetric():
    h, dt = 0.1, 1e-3
    cfg = _cfg(N=2, init=(-h, h), dt=dt)
    s = step_eigen_sde(initial_state(cfg), cfg)
    push = (1.0 / (2 * 2)) * dt / (2 * h)
    np.testing.assert_allclose(s.lambdas, [-h - h * h * dt - push, h - h * h * dt + push], rtol=0, atol=1e-15)


def test_gradient_flow_to_well():
    h, flux, s = run_eigen_sde(_cfg(model=CubicModel(1.0), init=(3.0,), t_end=20.0))
    assert s.lambdas[0] == pytest.approx(1.0, abs=1e-8)
    assert s.explosions == 0


def test_single_particle_crossing():
    h, flux, s = run_eigen_sde(_cfg(model=CubicModel(-1.0), init=(0.5,), t_end=1.0, cutoff=1e6))
    assert s.lambdas[0] < 0
    assert flux[0].signed_crossings == 1
    assert flux[0].rate == pytest.approx(1.0)


def test_cubic_restart_example():
    L = 1e3
    cfg = _cfg(N=3, init=(-2 * L, 0.0, 1.0), cutoff=L, flux_levels=(-5.0, 0.5, 3.0))
    s = handle_explosions(initial_state(cfg), cfg)
    np.testing.assert_array_equal(s.lambdas, [0.0, 1.0, L])
    assert s.explosions == 1
    np.testing.assert_array_equal(s.crossings, [1, 1, 1])


def test_quartic_restart_example():
    L = 1e3
    cfg = _cfg(N=2, model=QuarticModel(-1 / 24), init=(-1.0, 2 * L), cutoff=L)
    s = handle_explosions(initial_state(cfg), cfg)
    assert s.lambdas[0] == -1.0
    assert 0.0 <= s.lambdas[1] <= 1e-12 * L
    assert s.explosions == 1


def test_kill_example():
    L = 1e3
    cfg = _cfg(N=2, init=(-2 * L, 0.0), cutoff=L, mode="kill")
    s = handle_explosions(initial_state(cfg), cfg)
    np.testing.assert_array_equal(s.lambdas, [0.0])
    assert s.alive == 1 and s.explosions == 1


def test_restart_keeps_order_and_counts_explosions():
    cfg = SimConfig(N=10, model=CubicModel(0.0), t_end=20.0, burn_in=0.0, seed=3, flux_levels=(0.0, 30.0))
    cfg_track = SimConfig(**{**cfg.__dict__, "track_every": 1})
    h, flux, s = run_eigen_sde(cfg_track)
    for _, lam in s.paths:
        assert np.all(np.diff(lam) > 0)
        assert np.all(np.abs(lam) <= cfg.cutoff * (1 + 1e-9))
    assert s.explosions > 0
    assert s.forced_sorts == 0
    # above the bulk every crossing is a restarted particle coming down, up to
    # particles in transit at the window ends
    top = flux[1]
    assert top.restarts_counted == s.explosions
    assert abs(top.signed_crossings - s.explosions) <= cfg.N


def test_determinism():
    cfg = SimConfig(N=8, model=CubicModel(0.0), t_end=3.0, burn_in=1.0, seed=42, flux_levels=(-1.0, 0.0))
    h1, f1, s1 = run_eigen_sde(cfg)
    h2, f2, s2 = run_eigen_sde(cfg)
    assert np.array_equal(h1.counts, h2.counts)
    assert (h1.underflow, h1.overflow) == (h2.underflow, h2.overflow)
    assert [(r.signed_crossings, r.t_lo, r.t_hi) for r in f1] == [(r.signed_crossings, r.t_lo, r.t_hi) for r in f2]
    assert np.array_equal(s1.lambdas, s2.lambdas)
    h3, _, _ = run_eigen_sde(SimConfig(**{**cfg.__dict__, "seed": 43}))
    assert not np.array_equal(h1.counts, h3.counts)


def test_histogram_counts_every_sample():
    cfg = SimConfig(N=5, model=CubicModel(1.5), t_end=2.0, burn_in=0.5, seed=1)
    h, _, _ = run_eigen_sde(cfg)
    assert h.total == 5 * 1500


def test_no_forced_ordering_at_desk_scale():
    cfg = SimConfig(N=50, model=CubicModel(0.0), t_end=5.0, burn_in=1.0, seed=9)
    h, flux, s = run_eigen_sde(cfg)
    assert s.forced_sorts / s.steps < 1e-4
    assert not s.warnings


def test_kill_mode_monotone():
    cfg = SimConfig(N=20, model=CubicModel(0.0), t_end=10.0, burn_in=0.0, seed=5, mode="kill", alive_every=10)
    _, _, s = run_eigen_sde(cfg)
    alive = [n for _, n in s.alive_series]
    assert all(b <= a for a, b in zip(alive, alive[1:]))
    assert alive[-1] == cfg.N - s.explosions
    assert alive[-1] < cfg.N


def test_quartic_runs_and_stays_ordered():
    cfg = SimConfig(N=10, model=QuarticModel(-1 / 24), t_end=3.0, burn_in=1.0, seed=2, track_every=10)
    _, _, s = run_eigen_sde(cfg)
    for _, lam in s.paths:
        assert np.all(np.diff(lam) > 0)


def test_interaction_is_antisymmetric_sum():
    rng = np.random.default_rng(0)
    lam = np.sort(rng.normal(size=7))
    f = interaction(lam, 2.0, 7)
    assert abs(f.sum()) < 1e-12
    assert f[0] < 0 and f[-1] > 0


def test_validation():
    with pytest.raises(ValueError):
        SimConfig(N=0, model=CubicModel(0.0)).validate()
    with pytest.raises(ValueError):
        SimConfig(N=3, model=CubicModel(0.0), dt=0.0).validate()
    with pytest.raises(ValueError):
        SimConfig(N=3, model=CubicModel(0.0), burn_in=5, t_end=5).validate()
    with pytest.raises(ValueError):
        SimConfig(N=3, model=CubicModel(0.0), mode="bounce").validate()
    with pytest.raises(ValueError):
        SimConfig(N=3, model=CubicModel(0.0, 2.0), engine="matrix").validate()
    with pytest.raises(ValueError):
        SimConfig(N=2, model=CubicModel(0.0), init=(1.0, 0.0)).validate()
    notes = SimConfig(N=3, model=CubicModel(0.0, 0.5), cutoff=10.0).validate()
    assert len(notes) == 2


def test_bm_increment_moments():
    rng = np.random.default_rng(7)
    dt = 0.01
    draws = np.array([hermitian_bm_increment(3, dt, rng) for _ in range(100_000)])
    assert np.array_equal(draws, np.swapaxes(draws, 1, 2))
    assert np.var(draws[:, 0, 0]) == pytest.approx(dt, rel=0.03)
    assert np.var(draws[:, 1, 1]) == pytest.approx(dt, rel=0.03)
    assert np.var(draws[:, 0, 1]) == pytest.approx(dt / 2, rel=0.03)
    assert abs(np.mean(draws[:, 0, 0] * draws[:, 0, 1])) < 0.03 * dt


def test_bm_increment_rotation_invariance():
    rng = np.random.default_rng(8)
    dt = 1.0
    th = 0.7
    O = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    draws = np.array([hermitian_bm_increment(2, dt, rng) for _ in range(100_000)])
    rot = O @ draws @ O.T
    for i, j, v in ((0, 0, dt), (1, 1, dt), (0, 1, dt / 2)):
        assert np.var(rot[:, i, j]) == pytest.approx(v, rel=0.03)


def test_sym_eigen_examples():
    w, Q = sym_eigen(np.diag([3.0, -1.0, 2.0]))
    np.testing.assert_array_equal(w, [-1.0, 2.0, 3.0])
    np.testing.assert_allclose(np.abs(Q), np.eye(3)[:, [1, 2, 0]])
    w, Q = sym_eigen([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(w, [-1.0, 1.0], atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_sym_eigen_random(seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(20, 20))
    A = B + B.T
    w, Q = sym_eigen(A)
    amax = np.abs(A).max()
    assert np.abs(A - (Q * w) @ Q.T).max() <= 1e-10 * amax
    assert np.abs(Q.T @ Q - np.eye(20)).max() <= 1e-10
    np.testing.assert_allclose(w, np.linalg.eigvalsh(A), atol=1e-10 * amax)


def test_sym_eigen_errors():
    with pytest.raises(ValueError):
        sym_eigen([[0.0, 1.0], [2.0, 0.0]])
    rng = np.random.default_rng(0)
    B = rng.normal(size=(6, 6))
    with pytest.raises(EigenConvergenceError):
        sym_eigen(B + B.T, max_sweeps=1)


def test_matrix_engine_small():
    cfg = SimConfig(N=3, model=CubicModel(1 / 3), engine="matrix", t_end=20.0, burn_in=1.0, seed=4, track_every=50)
    h, flux, s = run_matrix_langevin(cfg)
    assert s.explosions > 0
    for _, lam in s.paths:
        assert np.all(np.diff(lam) >= 0)
    h2, flux2, _ = run(cfg)
    assert np.array_equal(h.counts, h2.counts)
    cfg_j = SimConfig(**{**cfg.__dict__, "eigensolver": "jacobi", "t_end": 2.0})
    cfg_l = SimConfig(**{**cfg.__dict__, "t_end": 2.0})
    hj, _, _ = run_matrix_langevin(cfg_j)
    hl, _, _ = run_matrix_langevin(cfg_l)
    assert np.array_equal(hj.counts, hl.counts)


def test_matrix_engine_quartic():
    cfg = SimConfig(N=5, model=QuarticModel(-1 / 24), engine="matrix", t_end=2.0, burn_in=0.5, seed=4)
    h, _, _ = run_matrix_langevin(cfg)
    assert h.total == 5 * 1500


def test_replicas_independent_of_jobs():
    cfg = SimConfig(N=5, model=CubicModel(0.0), t_end=2.0, burn_in=0.5, seed=11)
    h1, f1, s1 = run_replicas(cfg, 3, jobs=1)
    h2, f2, s2 = run_replicas(cfg, 3, jobs=3)
    assert np.array_equal(h1.counts, h2.counts)
    assert [r.signed_crossings for r in f1] == [r.signed_crossings for r in f2]
    assert h1.total == 3 * 5 * 1500
    single, _, _ = run_eigen_sde(cfg, make_rng(cfg.seed, 1))
    assert not np.array_equal(single.counts, h1.counts)


def test_merge_flux():
    a = [FluxRecord(0.0, 0.0, 2.0, 4, 1)]
    b = [FluxRecord(0.0, 1.0, 4.0, 2, 0)]
    m = merge_flux([a, b])
    assert m[0].signed_crossings == 6 and m[0].rate == pytest.approx(6 / 5)
    assert merge_flux([b, a])[0].signed_crossings == 6


def test_writers(tmp_path):
    h = Histogram.empty(-1, 1, 4)
    h.add([-0.9, 0.1, 0.2, 5.0])
    write_histogram_csv(tmp_path / "h.csv", h)
    raw = (tmp_path / "h.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert lines[0] == "bin_lo,bin_hi,count,density_estimate"
    assert lines[1] == "-1,-0.5,1,0.5"
    assert lines[3] == "0,0.5,2,1"
    write_flux_csv(tmp_path / "f.csv", [FluxRecord(0.0, 10.0, 100.0, 3, 0)])
    assert (tmp_path / "f.csv").read_text().splitlines()[1] == "0,10,100,3,0.033333333333333333"
    write_paths_csv(tmp_path / "p.csv", [(0.0, np.array([0.1, 0.2]))])
    assert (tmp_path / "p.csv").read_text().splitlines() == ["t,lambda_1,lambda_2", "0,0.10000000000000001,0.20000000000000001"]
    doc = {"a": 0.1, "b": [1, 2.5], "c": None, "d": math.inf, "e": True, "f": "x"}
    write_json(tmp_path / "m.json", doc)
    back = json.loads((tmp_path / "m.json").read_text())
    assert back == {"a": 0.1, "b": [1, 2.5], "c": None, "d": None, "e": True, "f": "x"}
    assert "0.10000000000000001" in dumps_json(doc)


def test_config_round_trip():
    cfg = SimConfig(N=4, model=QuarticModel(-0.01, 2.0), flux_levels=[1, 2])
    d = cfg.to_dict()
    assert d["model"] == {"family": "quartic", "g": -0.01, "beta": 2.0}
    assert d["flux_levels"] == [1.0, 2.0]
    json.dumps(d)
