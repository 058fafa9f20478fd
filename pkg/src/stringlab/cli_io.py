"""Run configuration, experiment orchestration and result files.

One executable with one subcommand per experiment::

    stringlab verify|simulate|energies|convergence|scaling|decay|data-check
        [--config run.json] [--out DIR] [--seed N] [--threads N]

Exit codes: 0 pass, 2 validation failure, 3 runtime guard (timelike/CFL),
4 acceptance failure.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import os
import subprocess
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from . import __version__
from .background import KINDS, PlaneWaveProfile, WeightParams, check_decay_assumption
from .diagnostics import (
    DECAY_HEADER,
    ENERGY_HEADER,
    decay_profile,
    decay_rows,
    energy_history,
    energy_rows,
    fmt,
    persistence_check,
    write_csv,
)
from .eqforms import run_identity_suite
from .initdata import SEED_KINDS, Seed, SeedProfiles, build_data, initial_energy_check, to_grid_state, weighted_sobolev_norm
from .solver import CFLViolation, Grid, SolverConfig, TimelikeViolation, convergence_study, evolve

EXPERIMENTS = ("verify", "simulate", "energies", "convergence", "scaling", "decay", "data-check")

EXIT_OK, EXIT_VALIDATION, EXIT_GUARD, EXIT_ACCEPTANCE = 0, 2, 3, 4


class ConfigError(ValueError):
    """Aggregated configuration problems; ``errors`` lists 'path: constraint'."""

    def __init__(self, errors: List[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


# ---------------------------------------------------------------------------
# configuration


DEFAULTS: Dict[str, Any] = {
    "experiment": "simulate",
    "background": {"kind": "gaussian", "A": 0.2, "sigma": 2.0, "p": 2.0},
    "weights": {"gamma": 0.5, "epsilon": 0.1},
    "seeds": {
        "f": {"kind": "gaussian", "amplitude": 1.0, "width": 1.5, "center": 0.0},
        "fbar": {"kind": "gaussian", "amplitude": 0.3, "width": 1.5, "center": 0.0},
        "delta": 0.01,
    },
    "grid": {"x_min": -60.0, "x_max": 60.0, "n": 1201},
    "solver": {"fd_order": 4, "cfl": 0.4, "t_end": 10.0, "snapshot_stride": 4, "D_floor": 1e-3},
    "diagnostics": {
        "k_max": 1,
        "u_ladder": [-8.0, -6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0],
        "ub_ladder": [-8.0, -6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0],
        "n_points": 1000,
        "deltas": [0.02, 0.01],
        "refinements": 3,
        "snapshot_csv_every": 0,
    },
    "output_dir": "out",
    "rng_seed": 0,
}


@dataclass
class RunConfig:
    experiment: str
    background: Dict[str, Any]
    weights: Dict[str, Any]
    seeds: Dict[str, Any]
    grid: Dict[str, Any]
    solver: Dict[str, Any]
    diagnostics: Dict[str, Any]
    output_dir: str
    rng_seed: int

    # typed views -------------------------------------------------------------

    @property
    def profile(self) -> PlaneWaveProfile:
        b = self.background
        kind = b["kind"]
        expo = b["sigma"] if kind == "gaussian" else b["p"]
        return PlaneWaveProfile(kind, float(b["A"]), float(expo))

    @property
    def params(self) -> WeightParams:
        return WeightParams(float(self.weights["gamma"]), float(self.weights["epsilon"]))

    def seed_profiles(self, delta: float | None = None) -> SeedProfiles:
        s = self.seeds
        mk = lambda d: Seed(d["kind"], float(d["amplitude"]), float(d["width"]), float(d.get("center", 0.0)))  # noqa: E731
        return SeedProfiles(mk(s["f"]), mk(s["fbar"]), float(s["delta"] if delta is None else delta))

    @property
    def grid_obj(self) -> Grid:
        g = self.grid
        return Grid.from_bounds(float(g["x_min"]), float(g["x_max"]), int(g["n"]))

    @property
    def solver_cfg(self) -> SolverConfig:
        s = self.solver
        return SolverConfig(int(s["fd_order"]), float(s["cfl"]), float(s["t_end"]), int(s["snapshot_stride"]), float(s["D_floor"]))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _merge(base, over, path, errors):
    out = copy.deepcopy(base)
    for k, v in over.items():
        p = f"{path}.{k}" if path else k
        if k not in base:
            errors.append(f"{p}: unknown key")
            continue
        if isinstance(base[k], dict) and k not in ("f", "fbar"):
            if not isinstance(v, dict):
                errors.append(f"{p}: must be an object")
                continue
            out[k] = _merge(base[k], v, p, errors)
        elif k in ("f", "fbar"):
            if not isinstance(v, dict):
                errors.append(f"{p}: must be an object")
                continue
            out[k] = _merge(base[k], v, p, errors)
        else:
            out[k] = v
    return out


def _num(d, key, path, errors, lo=None, hi=None, lo_open=False, hi_open=False, integer=False):
    v = d.get(key)
    p = f"{path}.{key}"
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (isinstance(v, float) and not math.isfinite(v)):
        errors.append(f"{p}: must be a finite number")
        return
    if integer and int(v) != v:
        errors.append(f"{p}: must be an integer")
        return
    if lo is not None and (v <= lo if lo_open else v < lo):
        errors.append(f"{p}: must be {'>' if lo_open else '>='} {lo}")
    if hi is not None and (v >= hi if hi_open else v > hi):
        errors.append(f"{p}: must be {'<' if hi_open else '<='} {hi}")


def validate(raw: Dict[str, Any]) -> RunConfig:
    """Fill defaults and check every constraint; raises ConfigError with all problems."""
    errors: List[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: must be a JSON object"])
    d = _merge(DEFAULTS, raw, "", errors)
    if d["experiment"] not in EXPERIMENTS:
        errors.append(f"experiment: must be one of {', '.join(EXPERIMENTS)}")
    b = d["background"]
    if b["kind"] not in KINDS:
        errors.append(f"background.kind: must be one of {', '.join(KINDS)}")
    _num(b, "A", "background", errors)
    _num(b, "sigma", "background", errors, lo=0, lo_open=True)
    _num(b, "p", "background", errors, lo=0, lo_open=True)
    w = d["weights"]
    v = w.get("gamma")
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not (0 < v < 1):
        errors.append("weights.gamma ∈ (0,1): must satisfy 0 < gamma < 1")
    _num(w, "epsilon", "weights", errors, lo=0, lo_open=True)
    s = d["seeds"]
    for name in ("f", "fbar"):
        sd = s[name]
        if sd["kind"] not in SEED_KINDS:
            errors.append(f"seeds.{name}.kind: must be one of {', '.join(SEED_KINDS)}")
        _num(sd, "amplitude", f"seeds.{name}", errors)
        _num(sd, "width", f"seeds.{name}", errors, lo=0, lo_open=True)
        _num(sd, "center", f"seeds.{name}", errors)
    _num(s, "delta", "seeds", errors, lo=0)
    g = d["grid"]
    _num(g, "x_min", "grid", errors)
    _num(g, "x_max", "grid", errors)
    _num(g, "n", "grid", errors, lo=16, integer=True)
    if all(isinstance(g.get(k), (int, float)) for k in ("x_min", "x_max")) and g["x_max"] <= g["x_min"]:
        errors.append("grid.x_max: must exceed grid.x_min")
    sv = d["solver"]
    if sv.get("fd_order") not in (2, 4):
        errors.append("solver.fd_order: must be 2 or 4")
    _num(sv, "cfl", "solver", errors, lo=0, hi=1, lo_open=True, hi_open=True)
    _num(sv, "t_end", "solver", errors, lo=0)
    _num(sv, "snapshot_stride", "solver", errors, lo=1, integer=True)
    _num(sv, "D_floor", "solver", errors, lo=0, lo_open=True)
    dg = d["diagnostics"]
    if dg.get("k_max") not in (0, 1):
        errors.append("diagnostics.k_max: must be 0 or 1")
    for lad in ("u_ladder", "ub_ladder"):
        L = dg.get(lad)
        if not isinstance(L, list) or not L or not all(isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) for x in L):
            errors.append(f"diagnostics.{lad}: must be a non-empty list of finite numbers")
    if isinstance(dg.get("u_ladder"), list) and isinstance(dg.get("ub_ladder"), list) and len(dg["u_ladder"]) != len(dg["ub_ladder"]):
        errors.append("diagnostics.ub_ladder: must have the same length as u_ladder")
    _num(dg, "n_points", "diagnostics", errors, lo=0, integer=True)
    _num(dg, "refinements", "diagnostics", errors, lo=2, integer=True)
    _num(dg, "snapshot_csv_every", "diagnostics", errors, lo=0, integer=True)
    D = dg.get("deltas")
    if not isinstance(D, list) or len(D) < 2 or not all(isinstance(x, (int, float)) and not isinstance(x, bool) and x > 0 for x in D):
        errors.append("diagnostics.deltas: must list at least two positive numbers")
    if not isinstance(d["output_dir"], str) or not d["output_dir"]:
        errors.append("output_dir: must be a non-empty string")
    r = d["rng_seed"]
    if isinstance(r, bool) or not isinstance(r, int) or not (0 <= r < 2 ** 64):
        errors.append("rng_seed: must be an integer in [0, 2^64)")
    if errors:
        raise ConfigError(errors)
    # one float spelling for cut values and deltas in every output
    for key in ("u_ladder", "ub_ladder", "deltas"):
        dg[key] = [float(x) for x in dg[key]]
    return RunConfig(**d)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"<parse>: {exc}"]) from exc
    return validate(raw)


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# experiments


@dataclass
class Outcome:
    status: int = EXIT_OK
    files: List[str] = field(default_factory=list)
    failures: List[Dict[str, Any]] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)

    def fail(self, check: str, detail: str, code: int = EXIT_ACCEPTANCE):
        self.failures.append({"check": check, "detail": detail})
        self.status = max(self.status, code)


def _simulate(cfg: RunConfig, delta: float | None = None, grid: Grid | None = None):
    grid = cfg.grid_obj if grid is None else grid
    data = build_data(cfg.seed_profiles(delta), cfg.profile, grid)
    return evolve(to_grid_state(data, grid), cfg.solver_cfg)


def _history(cfg, snaps):
    from .diagnostics import jet_history

    return jet_history(snaps, cfg.profile, 2, cfg.solver_cfg.fd_order)


def _ks(cfg):
    return tuple(range(int(cfg.diagnostics["k_max"]) + 1))


def exp_verify(cfg: RunConfig, out: Path, res: Outcome):
    rep = run_identity_suite(n_points=int(cfg.diagnostics["n_points"]), profile=cfg.profile, params=cfg.params, seed=cfg.rng_seed)
    p = out / "residuals.csv"
    rep.write_csv(p)
    res.files.append(p.name)
    for r in rep:
        if not r.passed:
            res.fail(r.name, f"max_rel={fmt(r.max_rel)} > {fmt(r.threshold)} {r.note}".strip())
    res.summary["identities"] = len(rep)


def exp_simulate(cfg: RunConfig, out: Path, res: Outcome):
    snaps = _simulate(cfg)
    every = int(cfg.diagnostics["snapshot_csv_every"]) or max(1, len(snaps) - 1)
    times = []
    for i in list(range(0, len(snaps), every)) + ([len(snaps) - 1] if (len(snaps) - 1) % every else []):
        s = snaps[i]
        name = f"snapshot_{i:05d}.csv"
        write_csv(out / name, ("t", "x", "phi", "v", "w"), ((s.t, x, a, b, c) for x, a, b, c in zip(s.x, s.phi, s.v, s.w)))
        res.files.append(name)
        times.append(s.t)
    res.summary["snapshot_times"] = times
    res.summary["min_D"] = float(min(np.min(s.D()) for s in snaps))


def exp_energies(cfg: RunConfig, out: Path, res: Outcome):
    snaps = _simulate(cfg)
    hist = _history(cfg, snaps)
    dg = cfg.diagnostics
    rows = energy_rows(hist, cfg.params, _ks(cfg), dg["u_ladder"], dg["ub_ladder"])
    write_csv(out / "energies.csv", ENERGY_HEADER, rows)
    res.files.append("energies.csv")
    neg = [r for r in rows if min(r[4:]) < 0]
    if neg:
        res.fail("energies-nonnegative", f"{len(neg)} rows with a negative energy")


def exp_convergence(cfg: RunConfig, out: Path, res: Outcome):
    g = cfg.grid_obj
    seeds, prof = cfg.seed_profiles(), cfg.profile
    make = lambda grid: to_grid_state(build_data(seeds, prof, grid), grid)  # noqa: E731
    sc = cfg.solver_cfg
    window = (g.x0 + sc.t_end, g.x_max - sc.t_end)
    cr = convergence_study(make, g, sc, int(cfg.diagnostics["refinements"]), window=window)
    rows = []
    for name, errs in cr.errors.items():
        for lvl, e in enumerate(errs):
            o = cr.orders[name][lvl - 1] if lvl > 0 else None
            rows.append((name, lvl, cr.dx[lvl], e, "" if o is None else o))
    write_csv(out / "convergence.csv", ("quantity", "level", "dx", "error", "observed_order"), rows)
    res.files.append("convergence.csv")
    res.summary["min_order"] = {k: cr.min_order(k) for k in cr.errors}
    res.summary["flags"] = cr.flags
    for k in ("phi", "v", "w"):
        mo = cr.min_order(k)
        if mo is not None and mo < 3.5 and sc.fd_order == 4:
            res.fail(f"order-{k}", f"observed order {fmt(mo)} < 3.5")


def exp_scaling(cfg: RunConfig, out: Path, res: Outcome):
    from .diagnostics import scaling_study

    dg = cfg.diagnostics

    def run(delta):
        hist = _history(cfg, _simulate(cfg, delta))
        return energy_history(hist, cfg.params, _ks(cfg), dg["u_ladder"], dg["ub_ladder"])

    deltas = [float(x) for x in dg["deltas"]]
    tab = scaling_study(run, deltas, _ks(cfg))
    rows = []
    for i, d in enumerate(deltas):
        for name in sorted(tab.values):
            rows.append((d, name, tab.values[name][i], tab.exponents[name]))
    write_csv(out / "scaling.csv", ("delta", "quantity", "sup_value", "fitted_exponent"), rows)
    res.files.append("scaling.csv")
    res.summary["exponents"] = tab.exponents
    if len(deltas) >= 2 and abs(deltas[0] / deltas[1] - 2.0) < 1e-9:
        for name in tab.values:
            r = tab.ratio(name)
            if name.startswith(("E2", "F2")) and not (3.4 <= r <= 4.6):
                res.fail(f"scaling-{name}", f"ratio {fmt(r)} outside [3.4, 4.6]")
            if name.startswith(("Eb2", "Fb2")) and abs(r - 1.0) > 0.1:
                res.fail(f"scaling-{name}", f"ratio {fmt(r)} differs from 1 by more than 10%")


def exp_decay(cfg: RunConfig, out: Path, res: Outcome):
    delta = float(cfg.seeds["delta"])
    hist = _history(cfg, _simulate(cfg))
    dp = decay_profile(hist, cfg.params, delta)
    write_csv(out / "decay.csv", DECAY_HEADER, decay_rows(dp))
    pc = persistence_check(hist)
    write_csv(out / "persistence.csv", ("t", "max_drift"), zip(pc.t, pc.drift_series))
    res.files += ["decay.csv", "persistence.csv"]
    res.summary.update(constant_L=dp.constant_L(), constant_Lb=dp.constant_Lb(), drift=pc.drift)
    if dp.constant_L() > 2.0 * float(dp.sup_L[(0, 0)][0]):
        res.fail("decay-L", "weighted sup of d_u phi exceeds twice its initial value")


def exp_data_check(cfg: RunConfig, out: Path, res: Outcome):
    prof, par = cfg.profile, cfg.params
    u = np.linspace(-100.0, 100.0, 20001)
    dc = check_decay_assumption(prof, par, 4, u)
    seeds = cfg.seed_profiles()
    I = weighted_sobolev_norm((seeds.f, seeds.fbar), 4, par.gamma)
    g = cfg.grid_obj
    data = build_data(seeds, prof, g)
    ie = initial_energy_check(data, prof, par, g)
    rows = [("decay_constant", i, dc[i], dc.growing[i]) for i in dc]
    rows += [("weighted_norm_I", 4, I, False), ("E2_0", 0, ie.E2, False), ("Eb2_0", 0, ie.Eb2, False),
             ("ratio_E2_over_delta2_I2", 0, ie.ratio_E, False), ("ratio_Eb2_over_I2", 0, ie.ratio_Eb, False)]
    write_csv(out / "data_check.csv", ("quantity", "order", "value", "growing"), rows)
    res.files.append("data_check.csv")
    res.summary["decay_constants"] = {str(i): dc[i] for i in dc}
    if not all(math.isfinite(dc[i]) for i in dc):
        res.fail("decay-constants", "non-finite constant")


RUNNERS = {
    "verify": exp_verify,
    "simulate": exp_simulate,
    "energies": exp_energies,
    "convergence": exp_convergence,
    "scaling": exp_scaling,
    "decay": exp_decay,
    "data-check": exp_data_check,
}


def _version_string() -> str:
    try:
        here = Path(__file__).resolve().parent
        r = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here, capture_output=True, text=True, timeout=5)
        if r.returncode == 0 and r.stdout.strip():
            return f"{__version__}+g{r.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def run(cfg: RunConfig, threads: int = 1) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = Outcome()
    t0 = time.perf_counter()
    try:
        RUNNERS[cfg.experiment](cfg, out, res)
    except TimelikeViolation as exc:
        res.fail("timelike", str(exc), EXIT_GUARD)
        res.failures[-1].update(node=exc.index, x=exc.x, t=exc.t, D=exc.D)
    except CFLViolation as exc:
        res.fail("cfl", str(exc), EXIT_GUARD)
    manifest = {
        "experiment": cfg.experiment,
        "version": _version_string(),
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "threads": threads,
        "wall_time_s": time.perf_counter() - t0,
        "files": sorted(res.files),
        "summary": res.summary,
        "failures": res.failures,
        "exit_status": res.status,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    return res.status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stringlab", description="Perturbed plane waves on the relativistic string.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="JSON run configuration (defaults used when omitted)")
    ap.add_argument("--out", help="output directory (overrides output_dir)")
    ap.add_argument("--seed", type=int, help="rng seed (overrides rng_seed)")
    ap.add_argument("--threads", type=int, default=1, help="worker threads (results are thread-count independent)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = {}
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigError(["<root>: must be a JSON object"])
        raw = dict(raw)
        raw["experiment"] = args.experiment
        if args.out:
            raw["output_dir"] = args.out
        if args.seed is not None:
            raw["rng_seed"] = args.seed
        cfg = validate(raw)
        if args.threads < 1:
            raise ConfigError(["--threads: must be >= 1"])
    except (ConfigError, json.JSONDecodeError, OSError) as exc:
        errs = exc.errors if isinstance(exc, ConfigError) else [str(exc)]
        for e in errs:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    status = run(cfg, args.threads)
    print(f"{cfg.experiment}: exit {status} -> {Path(cfg.output_dir) / 'manifest.json'}")
    return status


if __name__ == "__main__":
    sys.exit(main())
