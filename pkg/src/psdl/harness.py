"""State-space-collapse experiments over a heavy-traffic ladder.

A sweep fixes a limit triple (joint law, alpha, gamma) and runs the
event engine along a ladder of scaling parameters r.  The r-th system
slows the arrival rate to alpha * (1 - gamma / r), so r * (1 - rho_r)
equals gamma exactly, stretches sampled leads by r, starts empty, and
runs to the unscaled horizon r^2 * T with snapshots at r^2 * t.

Each snapshot is diffusion-scaled and compared, over a fixed quadrant
grid, against the invariant-family member with the observed mass: the
collapse error.  The same matrices give the lead-profile error (their
x = 0 row).  Per snapshot the harness also records the scaled workload,
the fraction of mass already past its deadline, and a KS statistic
comparing scaled sojourns harvested from a post-snapshot window against
the sojourn limit law at the observed mass.

``run_sweep`` executes all (r, replication) cells, optionally on a
process pool; rows are assembled in a fixed order so reports are
byte-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .distributions import (
    Deterministic,
    EmpiricalJoint,
    Exponential,
    JointDistribution,
    LinearJoint,
    ProductJoint,
    ScalarDistribution,
    Uniform,
    check_assumptions,
    joint_to_spec,
)
from .engine import ScenarioConfig, SimOutput, run
from .errors import ConfigError
from .manifold import ht_params, lift, sojourn_limit_cdf
from .measures import (
    PointMeasure,
    QuadrantGrid,
    default_grid,
    grid_quadrant_masses,
    mass_moment_chi,
    scale_diffusion,
)

__all__ = [
    "SweepConfig",
    "SweepRow",
    "SojournSample",
    "OverlayCurve",
    "CollapseReport",
    "build_scenario",
    "collapse_error",
    "lateness_fraction",
    "sojourn_snapshot_experiment",
    "run_sweep",
]

_INTERARRIVAL_KINDS = ("exponential", "deterministic", "uniform")


@dataclass(frozen=True)
class SweepConfig:
    """Ladder experiment over scaling parameters r.

    T and snapshot_times are in scaled (limit) time; sojourn_window is
    an unscaled duration appended after each snapshot for harvesting
    departures.  The joint law must be admissible for alpha.
    """

    joint: JointDistribution
    alpha: float
    gamma: float
    r_values: tuple[float, ...]
    T: float
    snapshot_times: tuple[float, ...]
    replications: int
    seed_base: int
    sojourn_window: float = 300.0
    interarrival_kind: str = "exponential"
    grid: QuadrantGrid = field(default_factory=default_grid)

    def __post_init__(self):
        if not (self.gamma > 0.0 and math.isfinite(self.gamma)):
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        rv = tuple(float(r) for r in self.r_values)
        if not rv or any(not (r > self.gamma and math.isfinite(r)) for r in rv):
            raise ConfigError("every r must exceed gamma (else the prelimit is overloaded)")
        object.__setattr__(self, "r_values", rv)
        if not (self.T > 0.0 and math.isfinite(self.T)):
            raise ConfigError(f"T must be positive, got {self.T}")
        ts = tuple(float(t) for t in self.snapshot_times)
        if not ts or any(not (0.0 < t <= self.T) for t in ts) or list(ts) != sorted(ts):
            raise ConfigError("snapshot times must be sorted and lie in (0, T]")
        object.__setattr__(self, "snapshot_times", ts)
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.sojourn_window < 0.0:
            raise ConfigError("sojourn_window must be >= 0")
        if self.interarrival_kind not in _INTERARRIVAL_KINDS:
            raise ConfigError(
                f"interarrival_kind must be one of {_INTERARRIVAL_KINDS}, "
                f"got {self.interarrival_kind!r}"
            )
        report = check_assumptions(self.joint, self.alpha)
        if not report.passed:
            names = ", ".join(c.name for c in report.failures())
            raise ConfigError(f"joint law inadmissible at alpha={self.alpha}: {names}")


def _interarrival_law(kind: str, rate: float) -> ScalarDistribution:
    if kind == "exponential":
        return Exponential(rate)
    if kind == "deterministic":
        return Deterministic(1.0 / rate)
    return Uniform(0.0, 2.0 / rate)


def _scenario_seed(seed_base: int, r: float, replication: int) -> int:
    r_bits = int(np.float64(r).view(np.uint64))
    ss = np.random.SeedSequence([seed_base, r_bits, replication])
    return int(ss.generate_state(1, np.uint64)[0])


def build_scenario(sweep: SweepConfig, r: float, replication: int) -> ScenarioConfig:
    """The r-th prelimit system for one replication: slowed arrivals,
    leads stretched by r, empty start, horizon r^2 T."""
    if not (r > sweep.gamma):
        raise ConfigError(f"r must exceed gamma={sweep.gamma}, got {r}")
    rate_r = sweep.alpha * (1.0 - sweep.gamma / r)
    return ScenarioConfig(
        interarrival=_interarrival_law(sweep.interarrival_kind, rate_r),
        joint=sweep.joint,
        horizon=r * r * sweep.T,
        snapshot_times=tuple(r * r * t for t in sweep.snapshot_times),
        seed=_scenario_seed(sweep.seed_base, r, replication),
        lead_scale=r,
        r=r,
        label=f"r={r:g}/rep={replication}",
    )


def collapse_error(
    snapshot: PointMeasure,
    r: float,
    joint: JointDistribution,
    alpha: float,
    grid: QuadrantGrid,
) -> float:
    """Distance between the diffusion-scaled snapshot and the invariant
    member carrying the same mass, over the grid quadrants."""
    scaled = scale_diffusion(snapshot, r)
    inv = lift(joint, alpha, scaled.total_mass)
    emp = grid_quadrant_masses(scaled, grid)
    th = grid_quadrant_masses(inv.quadrant, grid)
    return float(np.abs(emp - th).max())


def lateness_fraction(scaled_snapshot: PointMeasure) -> float | None:
    """Fraction of snapshot mass already past its deadline (lead < 0);
    None for an empty snapshot."""
    total = scaled_snapshot.total_mass
    if total <= 0.0:
        return None
    return (total - scaled_snapshot.quadrant_mass(0.0, 0.0)) / total


@dataclass(frozen=True)
class SojournSample:
    r: float
    t: float
    n: int
    ks: float | None
    z: float
    flag: str  # ok | window_exceeds_horizon | empty_snapshot | no_departures
    #     | insufficient_data | no_service_law


def _ks_distance(samples: np.ndarray, cdf: Callable[[float], float]) -> float:
    s = np.sort(np.asarray(samples, dtype=float))
    n = s.size
    f = np.array([cdf(x) for x in s])
    steps = np.arange(n + 1) / n
    return float(max(np.max(steps[1:] - f), np.max(f - steps[:-1])))


def _service_law(joint: JointDistribution) -> ScalarDistribution | None:
    if isinstance(joint, (ProductJoint, LinearJoint)):
        return joint.service
    return None


def sojourn_snapshot_experiment(
    out: SimOutput, r: float, t: float, window: float, nu: ScalarDistribution
) -> SojournSample:
    """KS statistic of scaled sojourns against the limit law.

    Departures inside the unscaled window [r^2 t, r^2 t + window] give
    sojourns; each is divided by r and the empirical CDF is compared to
    the sojourn limit law evaluated at the scaled mass observed at t.
    """
    t_lo = r * r * t
    _, _, snap = out.snapshot_at(t_lo)
    z = snap.count / r
    t_hi = t_lo + window
    if t_hi > out.config.horizon * (1.0 + 1e-12):
        return SojournSample(r, t, 0, None, z, "window_exceeds_horizon")
    if z <= 0.0:
        return SojournSample(r, t, 0, None, z, "empty_snapshot")
    soj = np.array(
        [
            j.sojourn / r
            for j in out.jobs
            if j.departure_time is not None and t_lo <= j.departure_time <= t_hi
        ]
    )
    if soj.size == 0:
        return SojournSample(r, t, 0, None, z, "no_departures")
    if soj.size < 20:
        # too few departures for a meaningful empirical CDF
        return SojournSample(r, t, int(soj.size), None, z, "insufficient_data")
    ks = _ks_distance(soj, lambda y: sojourn_limit_cdf(nu, z, y))
    return SojournSample(r, t, int(soj.size), ks, z, "ok")


# ---------------------------------------------------------------------------
# sweep execution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    r: float
    replication: int
    t: float
    n_jobs: int
    z_scaled: float
    w_scaled: float
    collapse_error: float
    lead_profile_error: float
    lateness_fraction: float | None
    sojourn_n: int
    sojourn_ks: float | None
    sojourn_flag: str

    def as_dict(self) -> dict:
        return {
            "r": self.r,
            "replication": self.replication,
            "t": self.t,
            "n_jobs": self.n_jobs,
            "z_scaled": self.z_scaled,
            "w_scaled": self.w_scaled,
            "collapse_error": self.collapse_error,
            "lead_profile_error": self.lead_profile_error,
            "lateness_fraction": self.lateness_fraction,
            "sojourn_n": self.sojourn_n,
            "sojourn_ks": self.sojourn_ks,
            "sojourn_flag": self.sojourn_flag,
        }


@dataclass(frozen=True)
class OverlayCurve:
    """Empirical vs limit lead-survival on the grid's y values (x = 0 row),
    recorded for replication 0 of each (r, t)."""

    r: float
    t: float
    empirical: tuple[float, ...]
    limit: tuple[float, ...]


@dataclass(frozen=True)
class CollapseReport:
    config: dict
    theory: dict
    rows: tuple[SweepRow, ...]
    overlays: tuple[OverlayCurve, ...]
    aggregates: dict

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "theory": self.theory,
            "aggregates": self.aggregates,
            "n_rows": len(self.rows),
        }


def _run_cell(sweep: SweepConfig, r_idx: int, replication: int) -> tuple[list[SweepRow], list[OverlayCurve]]:
    r = sweep.r_values[r_idx]
    out = run(build_scenario(sweep, r, replication))
    nu = _service_law(sweep.joint)
    grid = sweep.grid
    rows: list[SweepRow] = []
    overlays: list[OverlayCurve] = []
    for t in sweep.snapshot_times:
        _, _, snap = out.snapshot_at(r * r * t)
        scaled = scale_diffusion(snap, r) if snap.count else snap
        z = snap.count / r
        w = mass_moment_chi(scaled)
        emp = grid_quadrant_masses(scaled, grid)
        inv = lift(sweep.joint, sweep.alpha, z)
        th = grid_quadrant_masses(inv.quadrant, grid)
        diff = np.abs(emp - th)
        if nu is not None:
            sj = sojourn_snapshot_experiment(out, r, t, sweep.sojourn_window, nu)
        else:
            sj = SojournSample(r, t, 0, None, z, "no_service_law")
        rows.append(
            SweepRow(
                r=r,
                replication=replication,
                t=t,
                n_jobs=snap.count,
                z_scaled=z,
                w_scaled=w,
                collapse_error=float(diff.max()),
                lead_profile_error=float(diff[0, :].max()),
                lateness_fraction=lateness_fraction(scaled),
                sojourn_n=sj.n,
                sojourn_ks=sj.ks,
                sojourn_flag=sj.flag,
            )
        )
        if replication == 0:
            overlays.append(
                OverlayCurve(r, t, tuple(float(v) for v in emp[0, :]), tuple(float(v) for v in th[0, :]))
            )
    return rows, overlays


def _run_cell_star(args) -> tuple[list[SweepRow], list[OverlayCurve]]:
    return _run_cell(*args)


def _median(vals: list[float]) -> float | None:
    return float(np.median(vals)) if vals else None


def _quantile(vals: list[float], q: float) -> float | None:
    return float(np.quantile(vals, q)) if vals else None


def _slope_through_origin(zs: np.ndarray, ws: np.ndarray) -> float | None:
    denom = float(np.dot(ws, ws))
    if denom <= 0.0:
        return None
    return float(np.dot(zs, ws) / denom)


def _aggregate(sweep: SweepConfig, rows: tuple[SweepRow, ...]) -> dict:
    per_r = []
    per_r_t = []
    for r in sweep.r_values:
        r_rows = [row for row in rows if row.r == r]
        nonempty = [row for row in r_rows if row.n_jobs > 0]
        ce = [row.collapse_error for row in nonempty]
        le = [row.lead_profile_error for row in nonempty]
        zs = np.array([row.z_scaled for row in r_rows])
        ws = np.array([row.w_scaled for row in r_rows])
        ks = [row.sojourn_ks for row in r_rows if row.sojourn_ks is not None]
        late = [row.lateness_fraction for row in r_rows if row.lateness_fraction is not None]
        per_r.append(
            {
                "r": r,
                "n_rows": len(r_rows),
                "n_nonempty": len(nonempty),
                "median_collapse_error": _median(ce),
                "q25_collapse_error": _quantile(ce, 0.25),
                "q75_collapse_error": _quantile(ce, 0.75),
                "median_lead_profile_error": _median(le),
                "slope_through_origin": _slope_through_origin(zs, ws),
                "median_sojourn_ks": _median(ks),
                "median_lateness_fraction": _median(late),
                "mean_z_scaled": float(zs.mean()) if zs.size else None,
            }
        )
        for t in sweep.snapshot_times:
            t_rows = [row for row in r_rows if row.t == t]
            t_nonempty = [row.collapse_error for row in t_rows if row.n_jobs > 0]
            t_ks = [row.sojourn_ks for row in t_rows if row.sojourn_ks is not None]
            per_r_t.append(
                {
                    "r": r,
                    "t": t,
                    "n_nonempty": len(t_nonempty),
                    "median_collapse_error": _median(t_nonempty),
                    "median_sojourn_ks": _median(t_ks),
                    "median_sojourn_n": _median(
                        [float(row.sojourn_n) for row in t_rows if row.sojourn_ks is not None]
                    ),
                }
            )
    return {"per_r": per_r, "per_r_t": per_r_t}


def _grid_echo(grid: QuadrantGrid) -> dict:
    ys = ["-inf" if math.isinf(y) else float(y) for y in grid.y_values]
    return {"x_values": [float(x) for x in grid.x_values], "y_values": ys}


def run_sweep(sweep: SweepConfig, threads: int = 1) -> CollapseReport:
    """Execute every (r, replication) cell and assemble the report.

    threads > 1 fans cells out to a process pool; row order, and hence
    serialized output, is independent of the worker count.
    """
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    tasks = [
        (sweep, ri, rep)
        for ri in range(len(sweep.r_values))
        for rep in range(sweep.replications)
    ]
    if threads > 1:
        chunk = max(1, len(tasks) // (threads * 4))
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_cell_star, tasks, chunksize=chunk))
    else:
        results = [_run_cell_star(args) for args in tasks]

    rows = tuple(row for cell_rows, _ in results for row in cell_rows)
    overlays = tuple(ov for _, cell_ovs in results for ov in cell_ovs)

    a = _interarrival_law(sweep.interarrival_kind, sweep.alpha).std()
    theory = ht_params(sweep.alpha, a, sweep.joint.service_std(), sweep.gamma)
    config_echo = {
        "joint": joint_to_spec(sweep.joint),
        "alpha": sweep.alpha,
        "gamma": sweep.gamma,
        "r_values": list(sweep.r_values),
        "T": sweep.T,
        "snapshot_times": list(sweep.snapshot_times),
        "replications": sweep.replications,
        "seed_base": sweep.seed_base,
        "sojourn_window": sweep.sojourn_window,
        "interarrival_kind": sweep.interarrival_kind,
        "grid": _grid_echo(sweep.grid),
    }
    theory_echo = {
        "alpha": theory.alpha,
        "interarrival_std": theory.interarrival_std,
        "service_std": theory.service_std,
        "gamma": theory.gamma,
        "queue_workload_ratio": theory.queue_workload_ratio,
        "workload_drift": theory.workload_drift,
        "workload_var": theory.workload_var,
        "queue_drift": theory.queue_drift,
        "queue_var": theory.queue_var,
    }
    return CollapseReport(
        config=config_echo,
        theory=theory_echo,
        rows=rows,
        overlays=overlays,
        aggregates=_aggregate(sweep, rows),
    )
