"""Command-line experiment runner.

    ssmpkit run --config exp.toml [--seed S] [--jobs N] [--out DIR]
    ssmpkit check [--seed S] [--jobs N] [--out DIR] [--only 1 3 ...]

Outputs go to DIR/<kind>-seed<seed>/: manifest.json (full config with
defaults, seed, versions), summary.json and CSV data files.  Exit status 0 on
success, 1 when a check fails, 2 on config, spec or precondition errors."""
from __future__ import annotations

import argparse
import json
import math
import platform
import sys
from pathlib import Path

import numba
import numpy as np
import scipy

from . import __version__
from .acceptance import DEFAULT_SEED, run_battery
from .config import ConfigError, ExperimentConfig, load_config, resolve_spec
from .cones import ConeModel, apex_exit_law
from .conditioning import ConditioningError, entrance_ensemble
from .fluctuation import PassageError, passage_arrays
from .lamperti import lamperti_kiu
from .mapcore import SpecError, simulate_map, terminal_values
from .rng import RngStream
from ._io import write_csv
from .stationary import RHO_NAMES, estimate_rho


def _versions() -> dict:
    return {"ssmpkit": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": platform.python_version()}


def _jdump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, tuple):
        return list(v)
    raise TypeError(f"not serializable: {type(v)}")


# ------------------------------------------------------------ experiments

def _simulate(cfg, s, out):
    spec = resolve_spec(cfg)
    xT, thT, alive = terminal_values(spec, cfg.x0, cfg.theta0, cfg.T, cfg.N, s.fork(1), cfg.mesh)
    write_csv(out / "terminal.csv", ("xi_T", "state_T", "alive"), (xT, thT, alive))
    p = simulate_map(spec, cfg.x0, cfg.theta0, cfg.T, cfg.mesh, s.fork(2))
    write_csv(out / "path.csv", ("t", "xi", "state"), (p.t, p.xi, p.theta))
    ss = lamperti_kiu(p, cfg.alpha)
    write_csv(out / "ssmp_path.csv", ("t", "r", "state"), (ss.t, ss.r, ss.theta))
    x = xT[alive]
    return {"alive_fraction": float(alive.mean()),
            "mean_xi_T": float(x.mean()) if x.size else math.nan,
            "sd_xi_T": float(x.std(ddof=1)) if x.size > 1 else math.nan,
            "state_T_fractions": np.bincount(thT[alive], minlength=spec.n_states) / max(x.size, 1),
            "path_events": int(len(p.events["time"]))}


def _passage(cfg, s, out):
    spec = resolve_spec(cfg)
    d = passage_arrays(spec, cfg.x0, cfg.theta0, cfg.levels, cfg.N, s.fork(1), cfg.t_max,
                       cfg.mesh, bridge=True, alpha=cfg.alpha)
    per = []
    for i, x in enumerate(d["levels"]):
        tau = d["tau"][:, i]
        write_csv(out / f"passage_level{i}.csv",
                  ("tau", "clock", "undershoot", "overshoot", "state_before", "state_after", "crept"),
                  (tau, d["clock"][:, i], np.maximum(x - d["pre"][:, i], 0.0), d["post"][:, i] - x,
                   d["state_before"][:, i], d["state_after"][:, i], d["crept"][:, i]))
        ok = np.isfinite(tau)
        per.append({"level": float(x), "crossed_fraction": float(ok.mean()),
                    "mean_tau": float(tau[ok].mean()) if ok.any() else math.nan,
                    "mean_overshoot": float((d["post"][ok, i] - x).mean()) if ok.any() else math.nan,
                    "creep_fraction": float(d["crept"][ok, i].mean()) if ok.any() else math.nan})
    return {"levels": per}


def _rho(cfg, s, out):
    spec = resolve_spec(cfg)
    R = estimate_rho(spec, cfg.theta0, cfg.levels, cfg.N, s.fork(1), cfg.mesh, True, cfg.t_max)
    for i, dist in enumerate(R.dists):
        write_csv(out / f"rho_level{i}.csv", RHO_NAMES, tuple(dist.samples.T))
    return {"levels": R.levels, "cauchy": {f"{a},{b}": v for (a, b), v in R.cauchy.items()},
            "to_deepest": R.to_deepest,
            "means": {n: R.rho.mean(c) for c, n in enumerate(RHO_NAMES)}}


def _entrance(cfg, s, out):
    spec = resolve_spec(cfg)
    E = entrance_ensemble(spec, cfg.alpha, cfg.N, s.fork(1), log_r=cfg.log_r,
                          log_deltas=cfg.log_deltas, theta0=cfg.theta0, mesh=cfg.mesh)
    write_csv(out / "entrance_quad.csv", RHO_NAMES, tuple(E["quad"].T))
    write_csv(out / "entrance_exit1.csv", RHO_NAMES, tuple(E["exit1"].T))
    write_csv(out / "entrance_attempts.csv", ("attempts", "truncation", "lifetime"),
              (E["attempts"], E["truncation"], E["lifetime"]))
    if E["tau"].shape[1]:
        write_csv(out / "entrance_tau.csv", [f"tau_{k}" for k in range(E["tau"].shape[1])],
                  tuple(E["tau"].T))
    return {"n": int(E["quad"].shape[0]), "log_deltas": E["log_deltas"],
            "mean_tau_min_1": np.minimum(E["tau"], 1.0).mean(axis=0),
            "mean_attempts": float(E["attempts"].mean()),
            "quad_means": {n: float(np.mean(E["quad"][:, c])) for c, n in enumerate(RHO_NAMES)}}


def _cone(cfg, s, out):
    model = ConeModel(cfg.wedge_angle)
    a = apex_exit_law(model, cfg.radii, cfg.N, s.fork(1), dt=cfg.mesh)
    for i, d in enumerate(a["dists"]):
        write_csv(out / f"exit_angle_r{i}.csv", ("angle",), (d.values(0),))
    return {"model": model.summary(), "radii": a["radii"],
            "ks": {f"{i},{k}": v for (i, k), v in a["ks"].items()}, "consecutive": a["consecutive"]}


def _check(cfg, s, out, echo=print):
    res = run_battery(cfg.seed, cfg.only or None, out, echo)
    return {"passed": all(c.passed for c in res), "criteria": [c.summary() for c in res]}


RUNNERS = {"simulate": _simulate, "passage": _passage, "rho": _rho, "entrance": _entrance,
           "cone": _cone, "check": _check}


def run(cfg: ExperimentConfig, out_root: Path) -> tuple[int, Path]:
    """Run one experiment; returns (exit status, output directory)."""
    if cfg.seed is None:
        cfg.seed = DEFAULT_SEED
    out = Path(out_root) / f"{cfg.kind}-seed{cfg.seed}"
    if cfg.kind == "cone":
        ConeModel(cfg.wedge_angle)
    elif cfg.kind != "check":
        resolve_spec(cfg)  # fail before creating the output directory
    out.mkdir(parents=True, exist_ok=True)
    _jdump(out / "manifest.json", {"config": cfg.to_dict(), "seed": cfg.seed,
                                   "versions": _versions()})
    summary = RUNNERS[cfg.kind](cfg, RngStream(cfg.seed, 0), out)
    _jdump(out / "summary.json", summary)
    return (0 if summary.get("passed", True) else 1), out


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ssmpkit", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="u64 master seed")
    common.add_argument("--jobs", type=int, default=None, help="worker threads")
    common.add_argument("--out", default="out", help="output root directory")
    r = sub.add_parser("run", parents=[common], help="run one experiment from a config file")
    r.add_argument("--config", required=True, help="TOML experiment config")
    c = sub.add_parser("check", parents=[common], help="run the acceptance battery")
    c.add_argument("--only", type=int, nargs="+", default=None, help="criterion numbers")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.jobs is not None:
            if args.jobs < 1:
                raise ConfigError("--jobs must be >= 1")
            numba.set_num_threads(min(args.jobs, numba.config.NUMBA_NUM_THREADS))
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if args.cmd == "run":
            cfg = load_config(args.config)
        else:
            if args.only and any(k not in range(1, 13) for k in args.only):
                raise ConfigError("--only takes criterion numbers in 1..12")
            cfg = ExperimentConfig(kind="check", only=sorted(set(args.only or [])))
        if args.seed is not None:
            cfg.seed = args.seed
        status, out = run(cfg, Path(args.out))
    except (ConfigError, SpecError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, PassageError, ConditioningError, NotImplementedError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
