"""Command-line front end: ``rmnc density|simulate|evolve|verify``.

Configuration precedence is defaults < ``--config`` JSON < ``RMNC_SEED`` (seed
only) < explicit flags. A manifest written by a previous run is accepted as a
config file. Exit codes: 0 ok, 1 internal error, 2 invalid input, 3 failed
verification.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import subprocess
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .cubicsolve import ParameterDomainError
from .model import CubicModel, QuarticModel
from .plot import svg_plot
from .simulate import (SimConfig, dumps_json, run, run_replicas, write_csv, write_flux_csv,
                       write_histogram_csv, write_json, write_paths_csv)

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_VERIFY = 0, 1, 2, 3


class InputError(Exception):
    """Bad user input; maps to exit code 2."""


DEFAULTS = {
    "density": {"family": "cubic", "a": 0.0, "g": -1.0 / 24.0, "beta": 1.0,
                "x_min": -6.0, "x_max": 6.0, "points": 1201, "out": ".", "svg": False},
    "simulate": {"family": "cubic", "a": 0.0, "g": -1.0 / 24.0, "beta": 1.0, "n": 50,
                 "dt": 1e-3, "t_end": 100.0, "burn_in": 10.0, "cutoff": 1e3, "seed": 0,
                 "mode": "restart", "engine": "eigen-sde", "levels": [0.0],
                 "bins": [-6.0, 6.0, 400], "eigensolver": "lapack", "track_paths": False,
                 "track_every": 10, "replicas": 1, "jobs": 1, "out": ".", "svg": False},
    "evolve": {"a": 0.0, "beta": 1.0, "init": "delta", "init_file": None, "t": 50.0,
               "snapshots": 50, "targets": None, "readout": "invariant", "out": ".", "svg": False},
    "verify": {"scale": "quick", "seed": 1, "only": None, "out": None},
}


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: object
    version: str
    started: str
    finished: str = ""
    wall_seconds: float = 0.0
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    results: dict = field(default_factory=dict)


def version_string() -> str:
    """Package version, with ``git describe`` appended when available."""
    try:
        here = Path(__file__).resolve().parent
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _parse_complex_list(text: str):
    try:
        return [complex(t.strip().replace(" ", "")) for t in text.split(",") if t.strip()]
    except ValueError as e:
        raise InputError(f"cannot parse targets {text!r}: {e}")


def _parse_floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as e:
        raise InputError(f"cannot parse number list {text!r}: {e}")


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, config file, environment and flags."""
    cfg = dict(DEFAULTS[command])
    path = getattr(args, "config", None)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"cannot read config {path}: {e}")
        if isinstance(data, dict) and "config" in data and "command" in data:
            if data["command"] != command:
                raise InputError(f"manifest is for '{data['command']}', not '{command}'")
            data = data["config"]
        if not isinstance(data, dict):
            raise InputError("config must be a JSON object")
        unknown = sorted(set(data) - set(cfg))
        if unknown:
            raise InputError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(data)
    if "seed" in cfg and os.environ.get("RMNC_SEED") and getattr(args, "seed", None) is None:
        try:
            cfg["seed"] = int(os.environ["RMNC_SEED"])
        except ValueError:
            raise InputError("RMNC_SEED must be an integer")
    for k in cfg:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _model(cfg):
    fam = cfg.get("family", "cubic")
    try:
        if fam == "cubic":
            return CubicModel(float(cfg["a"]), float(cfg["beta"]))
        if fam == "quartic":
            return QuarticModel(float(cfg["g"]), float(cfg["beta"]))
    except ValueError as e:
        raise InputError(str(e))
    raise InputError(f"unknown family {fam!r}")


def _outdir(cfg) -> Path:
    p = Path(cfg["out"])
    p.mkdir(parents=True, exist_ok=True)
    return p


def _finish(man: RunManifest, out: Path, t0: float):
    path = out / "manifest.json"
    man.outputs.append(str(path))
    man.finished = _now()
    man.wall_seconds = round(time.time() - t0, 3)
    write_json(path, asdict(man))


# ---- density ---------------------------------------------------------------

def cmd_density(args) -> int:
    from .equilibrium import density, solution_summary, stationary
    cfg = resolve("density", args)
    m = _model(cfg)
    if cfg["points"] < 2 or not cfg["x_max"] > cfg["x_min"]:
        raise InputError("need points >= 2 and x_max > x_min")
    if args.dry_run:
        print(dumps_json(cfg))
        return EXIT_OK
    t0, started = time.time(), _now()
    sol = stationary(m)
    out = _outdir(cfg)
    x = np.linspace(cfg["x_min"], cfg["x_max"], int(cfg["points"]))
    rho = np.asarray(density(sol, x), dtype=float)
    man = RunManifest("density", cfg, None, version_string(), started)
    p = out / "density.csv"
    write_csv(p, ("x", "rho"), zip(x, rho))
    man.outputs.append(str(p))
    summ = solution_summary(sol)
    p = out / "solution.json"
    write_json(p, summ)
    man.outputs.append(str(p))
    if cfg["svg"]:
        p = out / "density.svg"
        label = f"a={m.a:g}" if m.family == "cubic" else f"g={m.g:g}"
        svg_plot([{"x": x, "y": rho, "label": label}], p, title=f"{m.family} stationary density, beta={m.beta:g}",
                 xlabel="x", ylabel="rho")
        man.outputs.append(str(p))
    man.results = summ
    _finish(man, out, t0)
    return EXIT_OK


# ---- simulate --------------------------------------------------------------

def _sim_config(cfg) -> SimConfig:
    bins = _parse_floats(cfg["bins"])
    if len(bins) != 3:
        raise InputError("bins must be lo,hi,count")
    sc = SimConfig(N=int(cfg["n"]), model=_model(cfg), dt=float(cfg["dt"]), t_end=float(cfg["t_end"]),
                   burn_in=float(cfg["burn_in"]), cutoff=float(cfg["cutoff"]), seed=int(cfg["seed"]),
                   mode=cfg["mode"], engine=cfg["engine"], flux_levels=tuple(_parse_floats(cfg["levels"])),
                   bins=(bins[0], bins[1], int(bins[2])), eigensolver=cfg["eigensolver"],
                   track_every=int(cfg["track_every"]) if cfg["track_paths"] else 0)
    try:
        sc.validate()
    except ValueError as e:
        raise InputError(str(e))
    return sc


def cmd_simulate(args) -> int:
    cfg = resolve("simulate", args)
    cfg["levels"] = _parse_floats(cfg["levels"])
    cfg["bins"] = _parse_floats(cfg["bins"])
    sc = _sim_config(cfg)
    if cfg["replicas"] < 1 or cfg["jobs"] < 1:
        raise InputError("replicas and jobs must be positive")
    if cfg["track_paths"] and cfg["replicas"] > 1:
        raise InputError("--track-paths needs a single replica")
    if args.dry_run:
        print(dumps_json(cfg))
        return EXIT_OK
    t0, started = time.time(), _now()
    out = _outdir(cfg)
    man = RunManifest("simulate", cfg, sc.seed, version_string(), started)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if cfg["replicas"] == 1:
            hist, flux, state = run(sc)
            states = [state]
        else:
            hist, flux, states = run_replicas(sc, int(cfg["replicas"]), int(cfg["jobs"]))
    man.warnings = sorted({str(w.message) for w in caught} | {w for s in states for w in s.warnings})
    p = out / "histogram.csv"
    write_histogram_csv(p, hist)
    man.outputs.append(str(p))
    p = out / "flux.csv"
    write_flux_csv(p, flux)
    man.outputs.append(str(p))
    res = {"explosions": [s.explosions for s in states],
           "forced_sorts": [s.forced_sorts for s in states],
           "retries": [s.retries for s in states],
           "samples": hist.total, "underflow": hist.underflow, "overflow": hist.overflow,
           "flux_rates": {f"{r.level:g}": r.rate for r in flux}}
    if sc.mode == "kill":
        res["alive"] = [[[t, a] for t, a in s.alive_series] for s in states]
    man.results = res
    if sc.track_every:
        p = out / "paths.csv"
        write_paths_csv(p, states[0].paths)
        man.outputs.append(str(p))
    if cfg["svg"]:
        p = out / "histogram.svg"
        series = [{"x": hist.centers, "y": hist.density(), "label": "simulation", "style": "points"}]
        try:
            from .equilibrium import density, stationary
            series.append({"x": hist.centers, "y": density(stationary(sc.model), hist.centers),
                           "label": "stationary density"})
        except (ParameterDomainError, ValueError):
            pass
        svg_plot(series, p, title="empirical spectral density", xlabel="lambda", ylabel="density")
        man.outputs.append(str(p))
        if sc.track_every:
            p = out / "paths.svg"
            paths = states[0].paths
            ts = np.array([t for t, _ in paths])
            lam = np.array([v for _, v in paths])
            clip = 3.0 * max(1.0, float(np.nanmax(np.abs(hist.edges))))
            svg_plot([{"x": ts, "y": np.where(np.abs(lam[:, i]) < clip, lam[:, i], np.nan), "style": "points"}
                      for i in range(lam.shape[1])], p, title="eigenvalue paths", xlabel="t", ylabel="lambda")
            man.outputs.append(str(p))
    _finish(man, out, t0)
    for w in man.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


# ---- evolve ----------------------------------------------------------------

def _read_density_csv(path):
    xs, rs = [], []
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                xs.append(float(row["x"]))
                rs.append(float(row["rho"]))
    except (OSError, KeyError, ValueError) as e:
        raise InputError(f"cannot read density file {path}: {e}")
    return np.array(xs), np.array(rs)


def cmd_evolve(args) -> int:
    from .dynamics import DEFAULT_TARGETS, delta_initial, evolve_G_series, sup_distance
    from .equilibrium import G, stationary
    from .stieltjes import piecewise_linear_transform
    cfg = resolve("evolve", args)
    m = _model({**cfg, "family": "cubic"})
    targets = list(DEFAULT_TARGETS) if not cfg["targets"] else (
        _parse_complex_list(cfg["targets"]) if isinstance(cfg["targets"], str)
        else [complex(*t) if isinstance(t, (list, tuple)) else complex(t) for t in cfg["targets"]])
    if not targets or any(t.imag <= 0 for t in targets):
        raise InputError("targets must lie in the upper half-plane")
    if not cfg["t"] >= 0 or int(cfg["snapshots"]) < 1:
        raise InputError("need t >= 0 and snapshots >= 1")
    inputs = []
    sol = stationary(m)
    if cfg["init"] == "delta":
        G0 = delta_initial
    elif cfg["init"] == "stationary":
        G0 = lambda z: G(sol, z)
    elif cfg["init"] == "file":
        if not cfg["init_file"]:
            raise InputError("--init file needs --init-file PATH (CSV with columns x,rho)")
        G0 = piecewise_linear_transform(*_read_density_csv(cfg["init_file"]))
        inputs.append(str(cfg["init_file"]))
    else:
        raise InputError("init must be delta, stationary or file")
    if args.dry_run:
        print(dumps_json({**cfg, "targets": [[t.real, t.imag] for t in targets]}))
        return EXIT_OK
    t0, started = time.time(), _now()
    out = _outdir(cfg)
    T = float(cfg["t"])
    times = [0.0] if T == 0 else [0.0] + list(np.linspace(0, T, int(cfg["snapshots"]) + 1)[1:])
    man = RunManifest("evolve", {**cfg, "targets": [[t.real, t.imag] for t in targets]}, None,
                      version_string(), started, inputs=inputs)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ev = evolve_G_series(G0, m, targets, times, readout=cfg["readout"])
    man.warnings = sorted({str(w.message) for w in caught})
    Gref = lambda z: G(sol, z)
    rows, dist = [], []
    for f in ev.fields:
        for w, v, ok in zip(f.points, f.values, f.converged):
            rows.append((f.time, w.real, w.imag, v.real, v.imag, int(bool(ok))))
        dist.append((f.time, sup_distance(f, Gref)))
    p = out / "G.csv"
    write_csv(p, ("t", "omega_re", "omega_im", "G_re", "G_im", "converged"), rows)
    man.outputs.append(str(p))
    p = out / "distance.csv"
    write_csv(p, ("t", "sup_distance"), dist)
    man.outputs.append(str(p))
    if cfg["svg"]:
        p = out / "distance.svg"
        svg_plot([{"x": [d[0] for d in dist[1:]], "y": [d[1] for d in dist[1:]], "label": "sup distance"}],
                 p, title="distance to the stationary transform", xlabel="t", ylabel="sup |G - G_a|", logy=True)
        man.outputs.append(str(p))
    man.results = {"final_sup_distance": dist[-1][1], "all_converged": bool(ev.final.converged.all())}
    _finish(man, out, t0)
    return EXIT_OK


# ---- verify ----------------------------------------------------------------

def cmd_verify(args) -> int:
    from .verify import run_all
    cfg = resolve("verify", args)
    if args.quick:
        cfg["scale"] = "quick"
    if args.full:
        cfg["scale"] = "full"
    only = None
    if cfg["only"]:
        try:
            only = [int(v) for v in str(cfg["only"]).split(",")]
        except ValueError:
            raise InputError("--only takes a comma separated list of criterion numbers")
    if args.dry_run:
        print(dumps_json(cfg))
        return EXIT_OK
    t0, started = time.time(), _now()

    def progress(rec):
        status = "PASS" if rec["pass"] else "FAIL"
        print(f"[{status}] criterion {rec['criterion']}: {rec['name']} ({rec['seconds']:.1f} s)", file=sys.stderr)

    verdicts = run_all(cfg["scale"], seed=int(cfg["seed"]), only=only, progress=progress)
    ok = all(v["pass"] for v in verdicts)
    doc = {"scale": cfg["scale"], "seed": cfg["seed"], "pass": ok, "criteria": verdicts}
    print(dumps_json(doc))
    if cfg["out"]:
        out = _outdir(cfg)
        man = RunManifest("verify", cfg, cfg["seed"], version_string(), started)
        p = out / "verify.json"
        write_json(p, doc)
        man.outputs.append(str(p))
        man.results = {"pass": ok}
        _finish(man, out, t0)
    return EXIT_OK if ok else EXIT_VERIFY


# ---- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rmnc", description="Random matrices with non-confining potentials.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file with option values (or a previous manifest)")
        sp.add_argument("--dry-run", action="store_true", help="print the resolved configuration and exit")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--svg", action="store_true", default=None, help="also write SVG plots")

    def model_opts(sp, quartic=True):
        if quartic:
            sp.add_argument("--family", choices=("cubic", "quartic"))
            sp.add_argument("--g", type=float, help="quartic coupling")
        sp.add_argument("--a", type=float, help="cubic tilt")
        sp.add_argument("--beta", type=float, help="Dyson index")

    d = sub.add_parser("density", help="stationary density and its summary")
    model_opts(d)
    d.add_argument("--x-min", type=float)
    d.add_argument("--x-max", type=float)
    d.add_argument("--points", type=int)
    common(d)
    d.set_defaults(func=cmd_density)

    s = sub.add_parser("simulate", help="finite-N simulation")
    model_opts(s)
    s.add_argument("--n", type=int, help="number of eigenvalues")
    s.add_argument("--dt", type=float)
    s.add_argument("--t-end", type=float)
    s.add_argument("--burn-in", type=float)
    s.add_argument("--cutoff", type=float, help="explosion threshold")
    s.add_argument("--seed", type=int)
    s.add_argument("--mode", choices=("restart", "kill"))
    s.add_argument("--engine", choices=("eigen-sde", "matrix"))
    s.add_argument("--levels", help="comma separated flux levels")
    s.add_argument("--bins", help="histogram layout lo,hi,count")
    s.add_argument("--eigensolver", choices=("lapack", "jacobi"))
    s.add_argument("--track-paths", action="store_true", default=None)
    s.add_argument("--track-every", type=int, help="steps between recorded path samples")
    s.add_argument("--replicas", type=int)
    s.add_argument("--jobs", type=int)
    common(s)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("evolve", help="time evolution of the Stieltjes transform")
    model_opts(e, quartic=False)
    e.add_argument("--init", choices=("delta", "stationary", "file"))
    e.add_argument("--init-file", help="CSV with columns x,rho")
    e.add_argument("--t", type=float, help="final time")
    e.add_argument("--snapshots", type=int, help="number of equally spaced output times")
    e.add_argument("--targets", help="comma separated complex targets, e.g. 0.5+1j,-1+0.75j")
    e.add_argument("--readout", choices=("invariant", "transport"))
    common(e)
    e.set_defaults(func=cmd_evolve)

    v = sub.add_parser("verify", help="run the acceptance checks")
    g = v.add_mutually_exclusive_group()
    g.add_argument("--quick", action="store_true")
    g.add_argument("--full", action="store_true")
    v.add_argument("--seed", type=int)
    v.add_argument("--only", help="comma separated criterion numbers")
    v.add_argument("--config")
    v.add_argument("--dry-run", action="store_true")
    v.add_argument("--out", help="directory for verify.json and a manifest")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    try:
        return args.func(args)
    except (InputError, ParameterDomainError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except KeyboardInterrupt:
        return EXIT_INTERNAL
    except Exception as e:  # pragma: no cover - reported, not handled
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
