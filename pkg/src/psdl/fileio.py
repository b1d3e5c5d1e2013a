"""Config files and output artifacts.

One JSON config drives one CLI command.  The file carries a
schema_version, an optional output_dir, and exactly one request block:

    scenario  -> simulate     (departures.csv, path.csv, snapshots.csv)
    sweep     -> sweep        (report.json, rows.csv, collapse_vs_r.csv,
                               profile_overlay.csv)
    lift      -> lift         (lift.csv, lift_summary.json)
    profile   -> profiles     (profile.csv)
    rbm       -> rbm          (rbm_path.csv, rbm_summary.json)

Floats in CSVs are printed with 17 significant digits and JSON is
dumped with sorted keys, so identical runs produce identical bytes.
Unknown keys anywhere are rejected: a typo should fail loudly, not
silently fall back to a default.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distributions import (
    JointDistribution,
    ScalarDistribution,
    joint_from_spec,
    scalar_from_spec,
)
from .engine import ScenarioConfig, SimOutput
from .errors import ConfigError
from .harness import CollapseReport, SweepConfig
from .measures import QuadrantGrid, default_grid
from .rbm import RBMSpec

__all__ = [
    "ConfigFile",
    "LiftRequest",
    "ProfileRequest",
    "RBMRequest",
    "load_config",
    "parse_scenario",
    "parse_sweep",
    "parse_lift",
    "parse_profile",
    "parse_rbm",
    "write_departures_csv",
    "write_path_csv",
    "write_snapshots_csv",
    "write_rows_csv",
    "write_report_json",
    "write_collapse_vs_r_csv",
    "write_profile_overlay_csv",
]

_FMT = "%.17g"
_REQUEST_KEYS = ("scenario", "sweep", "lift", "profile", "rbm")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return _FMT % float(v)


def _reject_unknown(d: dict, allowed: set[str], where: str) -> None:
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


@dataclass(frozen=True)
class ConfigFile:
    schema_version: int
    output_dir: str | None
    kind: str  # which request block is present
    payload: dict


def load_config(path) -> ConfigFile:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(raw, {"schema_version", "output_dir", *_REQUEST_KEYS}, "config root")
    version = raw.get("schema_version")
    if version != 1:
        raise ConfigError(f"unsupported schema_version {version!r}; expected 1")
    present = [k for k in _REQUEST_KEYS if k in raw]
    if len(present) != 1:
        raise ConfigError(
            f"config must contain exactly one of {_REQUEST_KEYS}, found {present or 'none'}"
        )
    kind = present[0]
    payload = raw[kind]
    if not isinstance(payload, dict):
        raise ConfigError(f"{kind!r} block must be a JSON object")
    out_dir = raw.get("output_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("output_dir must be a string")
    return ConfigFile(1, out_dir, kind, payload)


# ---------------------------------------------------------------------------
# request parsing
# ---------------------------------------------------------------------------


def parse_scenario(payload: dict, seed_override: int | None = None) -> ScenarioConfig:
    allowed = {
        "interarrival",
        "first_interarrival",
        "joint",
        "horizon",
        "snapshot_times",
        "seed",
        "lead_scale",
        "initial_jobs",
        "r",
        "label",
    }
    _reject_unknown(payload, allowed, "scenario")
    try:
        interarrival = scalar_from_spec(payload["interarrival"])
        joint = joint_from_spec(payload["joint"])
        horizon = float(payload["horizon"])
    except KeyError as exc:
        raise ConfigError(f"scenario missing required field {exc}") from None
    first = payload.get("first_interarrival")
    init = payload.get("initial_jobs", "empty")
    if init == "empty":
        init_jobs: tuple = ()
    elif isinstance(init, list):
        init_jobs = tuple((float(v), float(l)) for v, l in init)
    else:
        raise ConfigError('initial_jobs must be "empty" or a list of [service, lead] pairs')
    seed = int(payload.get("seed", 0))
    if seed_override is not None:
        seed = seed_override
    return ScenarioConfig(
        interarrival=interarrival,
        joint=joint,
        horizon=horizon,
        snapshot_times=tuple(float(t) for t in payload.get("snapshot_times", ())),
        seed=seed,
        lead_scale=float(payload.get("lead_scale", 1.0)),
        first_interarrival=scalar_from_spec(first) if first is not None else None,
        initial_jobs=init_jobs,
        r=float(payload.get("r", 1.0)),
        label=str(payload.get("label", "")),
    )


def _parse_grid(spec: dict | None) -> QuadrantGrid:
    if spec is None:
        return default_grid()
    allowed = {"x_max", "x_step", "y_min", "y_max", "y_step"}
    _reject_unknown(spec, allowed, "grid")
    try:
        x_max, x_step = float(spec["x_max"]), float(spec["x_step"])
        y_min, y_max, y_step = (
            float(spec["y_min"]),
            float(spec["y_max"]),
            float(spec["y_step"]),
        )
    except KeyError as exc:
        raise ConfigError(f"grid spec missing field {exc}") from None
    if x_step <= 0 or y_step <= 0 or x_max <= 0 or y_max <= y_min:
        raise ConfigError("grid steps must be positive and y_max > y_min")
    nx = int(round(x_max / x_step))
    ny = int(round((y_max - y_min) / y_step))
    xs = np.linspace(0.0, x_max, nx + 1)
    ys = np.concatenate(([-np.inf], np.linspace(y_min, y_max, ny + 1)))
    return QuadrantGrid(xs, ys)


def parse_sweep(payload: dict, seed_override: int | None = None) -> SweepConfig:
    allowed = {
        "joint",
        "alpha",
        "gamma",
        "r_values",
        "T",
        "snapshot_times",
        "replications",
        "seed_base",
        "sojourn_window",
        "interarrival_kind",
        "grid",
    }
    _reject_unknown(payload, allowed, "sweep")
    try:
        seed_base = int(payload["seed_base"])
        if seed_override is not None:
            seed_base = seed_override
        return SweepConfig(
            joint=joint_from_spec(payload["joint"]),
            alpha=float(payload["alpha"]),
            gamma=float(payload["gamma"]),
            r_values=tuple(float(r) for r in payload["r_values"]),
            T=float(payload["T"]),
            snapshot_times=tuple(float(t) for t in payload["snapshot_times"]),
            replications=int(payload["replications"]),
            seed_base=seed_base,
            sojourn_window=float(payload.get("sojourn_window", 300.0)),
            interarrival_kind=str(payload.get("interarrival_kind", "exponential")),
            grid=_parse_grid(payload.get("grid")),
        )
    except KeyError as exc:
        raise ConfigError(f"sweep missing required field {exc}") from None


@dataclass(frozen=True)
class LiftRequest:
    joint: JointDistribution
    alpha: float
    z: float
    method: str
    tol: float
    grid: QuadrantGrid


def parse_lift(payload: dict) -> LiftRequest:
    allowed = {"joint", "alpha", "z", "method", "tol", "grid"}
    _reject_unknown(payload, allowed, "lift")
    try:
        return LiftRequest(
            joint=joint_from_spec(payload["joint"]),
            alpha=float(payload["alpha"]),
            z=float(payload["z"]),
            method=str(payload.get("method", "auto")),
            tol=float(payload.get("tol", 1e-6)),
            grid=_parse_grid(payload.get("grid")),
        )
    except KeyError as exc:
        raise ConfigError(f"lift request missing field {exc}") from None


_PROFILE_KINDS = ("lead_product", "time_in_queue", "sojourn", "linear_deadline")


@dataclass(frozen=True)
class ProfileRequest:
    profile: str
    nu: ScalarDistribution
    z: float
    y_values: tuple[float, ...]
    lam: ScalarDistribution | None = None
    alpha: float | None = None
    c: float | None = None


def parse_profile(payload: dict) -> ProfileRequest:
    allowed = {"profile", "nu", "lam", "alpha", "c", "z", "y_values"}
    _reject_unknown(payload, allowed, "profile")
    kind = payload.get("profile")
    if kind not in _PROFILE_KINDS:
        raise ConfigError(f"profile must be one of {_PROFILE_KINDS}, got {kind!r}")
    try:
        nu = scalar_from_spec(payload["nu"])
        z = float(payload["z"])
        ys_spec = payload["y_values"]
    except KeyError as exc:
        raise ConfigError(f"profile request missing field {exc}") from None
    if isinstance(ys_spec, dict):
        _reject_unknown(ys_spec, {"y_min", "y_max", "n"}, "y_values")
        try:
            ys = np.linspace(float(ys_spec["y_min"]), float(ys_spec["y_max"]), int(ys_spec["n"]))
        except KeyError as exc:
            raise ConfigError(f"y_values range missing field {exc}") from None
        y_values = tuple(float(y) for y in ys)
    else:
        y_values = tuple(float(y) for y in ys_spec)
    lam = payload.get("lam")
    alpha = payload.get("alpha")
    c = payload.get("c")
    if kind == "lead_product" and (lam is None or alpha is None):
        raise ConfigError("lead_product profile needs 'lam' and 'alpha'")
    if kind == "linear_deadline" and c is None:
        raise ConfigError("linear_deadline profile needs 'c'")
    return ProfileRequest(
        profile=kind,
        nu=nu,
        z=z,
        y_values=y_values,
        lam=scalar_from_spec(lam) if lam is not None else None,
        alpha=float(alpha) if alpha is not None else None,
        c=float(c) if c is not None else None,
    )


@dataclass(frozen=True)
class RBMRequest:
    spec: RBMSpec
    horizon: float
    dt: float
    seed: int
    quantiles: tuple[float, ...]


def parse_rbm(payload: dict, seed_override: int | None = None) -> RBMRequest:
    allowed = {"drift", "variance", "x0", "horizon", "dt", "seed", "quantiles"}
    _reject_unknown(payload, allowed, "rbm")
    try:
        spec = RBMSpec(
            drift=float(payload["drift"]),
            variance=float(payload["variance"]),
            x0=float(payload.get("x0", 0.0)),
        )
        horizon = float(payload["horizon"])
        dt = float(payload["dt"])
    except KeyError as exc:
        raise ConfigError(f"rbm request missing field {exc}") from None
    seed = int(payload.get("seed", 0))
    if seed_override is not None:
        seed = seed_override
    return RBMRequest(
        spec=spec,
        horizon=horizon,
        dt=dt,
        seed=seed,
        quantiles=tuple(float(q) for q in payload.get("quantiles", ())),
    )


# ---------------------------------------------------------------------------
# writers
# ---------------------------------------------------------------------------


def _write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_departures_csv(out: SimOutput, path) -> None:
    _write_csv(
        path,
        ["id", "arrival", "sojourn", "service_req", "lateness"],
        (
            (j.job_id, j.arrival_time, j.sojourn, j.service_req, j.lateness)
            for j in out.departures()
        ),
    )


def write_path_csv(out: SimOutput, path) -> None:
    # one row per event; z and w are the post-event (right-continuous) values
    p = out.path
    _write_csv(
        path,
        ["t", "z", "w", "s"],
        ((p.times[i], int(p.z[i]), p.w_post[i], p.s[i]) for i in range(len(p))),
    )


def write_snapshots_csv(out: SimOutput, path) -> None:
    # time_index is the position in the snapshot schedule; times live in the summary
    def rows():
        for idx, (_, _, m) in enumerate(out.snapshots):
            for res, lead, wt in zip(m.residuals, m.leads, m.weights):
                yield (idx, res, lead, wt)

    _write_csv(path, ["time_index", "residual", "lead", "weight"], rows())


def write_rows_csv(report: CollapseReport, path) -> None:
    header = [
        "r",
        "replication",
        "t",
        "n_jobs",
        "z_scaled",
        "w_scaled",
        "collapse_error",
        "lead_profile_error",
        "lateness_fraction",
        "sojourn_n",
        "sojourn_ks",
        "sojourn_flag",
    ]
    _write_csv(path, header, (tuple(row.as_dict()[k] for k in header) for row in report.rows))


def write_report_json(report: CollapseReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_collapse_vs_r_csv(report: CollapseReport, path) -> None:
    header = [
        "r",
        "n_nonempty",
        "median_collapse_error",
        "q25_collapse_error",
        "q75_collapse_error",
        "median_lead_profile_error",
        "slope_through_origin",
    ]
    _write_csv(
        path,
        header,
        (tuple(entry[k] for k in header) for entry in report.aggregates["per_r"]),
    )


def write_profile_overlay_csv(report: CollapseReport, path) -> None:
    ys = report.config["grid"]["y_values"]

    def rows():
        for ov in report.overlays:
            for y, e, l in zip(ys, ov.empirical, ov.limit):
                yield (ov.r, ov.t, y, e, l)

    _write_csv(path, ["r", "t", "y", "empirical_survival", "limit_survival"], rows())
