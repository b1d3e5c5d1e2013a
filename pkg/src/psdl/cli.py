"""Command-line front end.

Every command reads one JSON config and writes files into an output
directory; nothing is interactive and nothing depends on wall-clock
entropy, so a fixed config and seed reproduce output bytes exactly.

Exit codes: 0 success, 2 bad configuration or usage, 3 runtime failure
inside the simulator or a numerical routine.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .engine import busy_rate_check, run
from .errors import ConfigError, SimulationError
from .harness import run_sweep
from .manifold import (
    lead_profile_product,
    lift,
    linear_deadline_profile,
    sojourn_limit_cdf,
    time_in_queue_profile,
)
from .measures import grid_quadrant_masses
from .rbm import deadline_quantile, simulate, stationary_cdf

_FMT = "%.17g"


def _out_dir(args, cfg: fileio.ConfigFile) -> Path:
    d = Path(args.out) if args.out else Path(cfg.output_dir or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _require(cfg: fileio.ConfigFile, kind: str) -> dict:
    if cfg.kind != kind:
        raise ConfigError(
            f"config contains a {cfg.kind!r} request; this command needs {kind!r}"
        )
    return cfg.payload


def cmd_simulate(args) -> int:
    cfg = fileio.load_config(args.config)
    scenario = fileio.parse_scenario(_require(cfg, "scenario"), args.seed_override)
    out = run(scenario)
    d = _out_dir(args, cfg)
    fileio.write_departures_csv(out, d / "departures.csv")
    fileio.write_path_csv(out, d / "path.csv")
    fileio.write_snapshots_csv(out, d / "snapshots.csv")
    summary = {
        "n_jobs": len(out.jobs),
        "n_departures": len(out.departures()),
        "horizon": scenario.horizon,
        "seed": scenario.seed,
        "snapshot_times": list(scenario.snapshot_times),
        "busy_rate_check": busy_rate_check(out),
    }
    with open(d / "simulate_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"simulate: {len(out.jobs)} jobs, {len(out.departures())} departures -> {d}")
    return 0


def cmd_lift(args) -> int:
    cfg = fileio.load_config(args.config)
    req = fileio.parse_lift(_require(cfg, "lift"))
    meas = lift(req.joint, req.alpha, req.z, method=req.method, tol=req.tol)
    d = _out_dir(args, cfg)
    table = grid_quadrant_masses(meas.quadrant, req.grid)
    rows = (
        (x, y, table[i, j])
        for i, x in enumerate(req.grid.x_values)
        for j, y in enumerate(req.grid.y_values)
    )
    fileio._write_csv(d / "lift.csv", ["x", "y", "mass"], rows)
    summary = {
        "method": meas.method,
        "z": meas.z,
        "alpha": meas.alpha,
        "total_mass": meas.total_mass,
        "mass_at_origin": meas.eval(0.0, -np.inf),
    }
    import json

    with open(d / "lift_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"lift: method={meas.method} z={meas.z:g} -> {d}")
    return 0


def cmd_profiles(args) -> int:
    cfg = fileio.load_config(args.config)
    req = fileio.parse_profile(_require(cfg, "profile"))
    if req.profile == "lead_product":
        fn = lambda y: lead_profile_product(req.nu, req.lam, req.alpha, req.z, y)
        label = "cdf"
    elif req.profile == "time_in_queue":
        fn = lambda y: time_in_queue_profile(req.nu, req.z, y)
        label = "survival"
    elif req.profile == "sojourn":
        fn = lambda y: sojourn_limit_cdf(req.nu, req.z, y)
        label = "cdf"
    else:
        fn = lambda y: linear_deadline_profile(req.nu, req.c, req.z, y)
        label = "survival"
    values = [(y, fn(y)) for y in req.y_values]
    d = _out_dir(args, cfg)
    fileio._write_csv(d / "profile.csv", ["y", label], values)
    print(f"profiles: {req.profile} at {len(values)} points -> {d}")
    return 0


def cmd_rbm(args) -> int:
    cfg = fileio.load_config(args.config)
    req = fileio.parse_rbm(_require(cfg, "rbm"), args.seed_override)
    path = simulate(req.spec, req.horizon, req.dt, req.seed)
    d = _out_dir(args, cfg)
    fileio._write_csv(
        d / "rbm_path.csv", ["t", "x"], zip(path.times, path.values)
    )
    summary = {
        "drift": req.spec.drift,
        "variance": req.spec.variance,
        "time_average": path.time_average(),
        "quantiles": {
            _FMT % q: deadline_quantile(req.spec, q) for q in req.quantiles
        },
    }
    if req.spec.drift < 0.0:
        summary["stationary_rate"] = req.spec.stationary_rate
        summary["stationary_mean"] = req.spec.variance / (2.0 * abs(req.spec.drift))
        summary["stationary_cdf_at_mean"] = stationary_cdf(
            req.spec, summary["stationary_mean"]
        )
    import json

    with open(d / "rbm_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"rbm: {path.values.size - 1} steps, time average {path.time_average():.6g} -> {d}")
    return 0


def _resolve_threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("PSDL_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"PSDL_THREADS must be an integer, got {env!r}") from None
    return 1


def cmd_sweep(args) -> int:
    cfg = fileio.load_config(args.config)
    sweep = fileio.parse_sweep(_require(cfg, "sweep"), args.seed_override)
    report = run_sweep(sweep, threads=_resolve_threads(args))
    d = _out_dir(args, cfg)
    fileio.write_report_json(report, d / "report.json")
    fileio.write_rows_csv(report, d / "rows.csv")
    fileio.write_collapse_vs_r_csv(report, d / "collapse_vs_r.csv")
    fileio.write_profile_overlay_csv(report, d / "profile_overlay.csv")
    print(f"sweep: {len(report.rows)} rows over r={list(sweep.r_values)} -> {d}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psdl",
        description="Processor-sharing queues with soft deadlines: "
        "simulation, invariant measures, and collapse experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "simulate": (cmd_simulate, "run one scenario and write its logs"),
        "lift": (cmd_lift, "tabulate an invariant measure on a grid"),
        "profiles": (cmd_profiles, "evaluate a lead/sojourn profile"),
        "rbm": (cmd_rbm, "simulate a reflected Brownian path"),
        "sweep": (cmd_sweep, "run a collapse sweep over an r ladder"),
    }
    for name, (fn, help_text) in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument(
            "--seed-override", type=int, default=None, help="replace the config seed"
        )
        if name == "sweep":
            p.add_argument(
                "--threads",
                type=int,
                default=None,
                help="worker processes (default: PSDL_THREADS or 1)",
            )
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
