"""Finite point measures on the residual/lead half-plane.

The simulator's state at a fixed time is a finite weighted point set

    {(residual_i, lead_i, w_i)}  with residual_i > 0, lead_i real,

read as a measure on [0, oo) x R.  Analytical limit objects enter as
``QuadrantFunction``s: callables returning the mass of closed quadrants
[x, oo) x [y, oo).  Both kinds of object can be tabulated on a
``QuadrantGrid`` (a finite family of quadrant corners, with y = -inf
rows giving residual half-spaces), and the working distance between two
states is the maximum absolute mass discrepancy over the grid quadrants.

Diffusion and fluid scalings act on points as (v, l, w) -> (v, l/r, w/r);
they differ only in the time change applied by the caller.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError

__all__ = [
    "PointMeasure",
    "QuadrantGrid",
    "QuadrantFunction",
    "LeadProfile",
    "default_grid",
    "quadrant_mass",
    "scale_diffusion",
    "scale_fluid",
    "project_lead",
    "mass_moment_chi",
    "grid_quadrant_masses",
    "quadrant_distance",
    "discretize_quadrant_function",
    "point_measure_to_csv",
    "quadrant_function_to_csv",
]

_FMT = "%.17g"


@dataclass(frozen=True)
class PointMeasure:
    """Weighted atoms (residual, lead, weight); residuals strictly positive."""

    residuals: np.ndarray
    leads: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        res = np.asarray(self.residuals, dtype=float)
        lead = np.asarray(self.leads, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if not (res.shape == lead.shape == w.shape and res.ndim == 1):
            raise ConfigError("residuals, leads, weights must be equal-length 1-d arrays")
        if res.size and not np.all(res > 0.0):
            raise ConfigError("all residuals must be strictly positive")
        if res.size and not (np.all(np.isfinite(res)) and np.all(np.isfinite(lead))):
            raise ConfigError("atom coordinates must be finite")
        if res.size and not np.all(w > 0.0):
            raise ConfigError("all weights must be strictly positive")
        object.__setattr__(self, "residuals", res)
        object.__setattr__(self, "leads", lead)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_points(
        cls, points: Sequence[tuple[float, float]], weight: float = 1.0
    ) -> "PointMeasure":
        res = np.array([p[0] for p in points], dtype=float)
        lead = np.array([p[1] for p in points], dtype=float)
        return cls(res, lead, np.full(res.shape, float(weight)))

    @classmethod
    def empty(cls) -> "PointMeasure":
        z = np.zeros(0)
        return cls(z, z.copy(), z.copy())

    @property
    def count(self) -> int:
        return int(self.residuals.size)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def quadrant_mass(self, x: float, y: float) -> float:
        if math.isnan(x) or x < 0.0:
            raise ConfigError(f"residual threshold must be >= 0, got {x}")
        if self.count == 0:
            return 0.0
        sel = (self.residuals >= x) & (self.leads >= y)
        return float(self.weights[sel].sum())


@dataclass(frozen=True)
class QuadrantGrid:
    """Corner coordinates for the working quadrant family.

    x_values: residual thresholds, strictly increasing, starting at 0.
    y_values: lead thresholds, strictly increasing; a leading -inf row
    tabulates residual half-spaces [x, oo) x R.
    """

    x_values: np.ndarray
    y_values: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.x_values, dtype=float)
        ys = np.asarray(self.y_values, dtype=float)
        if xs.size == 0 or ys.size == 0:
            raise ConfigError("quadrant grid must be nonempty")
        if xs[0] != 0.0 or np.any(np.diff(xs) <= 0.0) or np.any(xs < 0.0):
            raise ConfigError("grid x values must start at 0 and increase strictly")
        if np.any(np.diff(ys) <= 0.0) or np.isposinf(ys).any():
            raise ConfigError("grid y values must increase strictly (only the first may be -inf)")
        object.__setattr__(self, "x_values", xs)
        object.__setattr__(self, "y_values", ys)


def default_grid() -> QuadrantGrid:
    """x in {0, 0.1, ..., 5.0}; y in {-inf} + {-5.0, -4.9, ..., 5.0}."""
    xs = np.linspace(0.0, 5.0, 51)
    ys = np.concatenate(([-np.inf], np.linspace(-5.0, 5.0, 101)))
    return QuadrantGrid(xs, ys)


@dataclass(frozen=True)
class QuadrantFunction:
    """An analytic measure given by its closed-quadrant mass function.

    eval_fn(x, y) returns the mass of [x, oo) x [y, oo); y may be -inf.
    grid_fn, when present, tabulates eval_fn on coordinate arrays in one
    vectorized call and must agree with it pointwise.
    """

    eval_fn: Callable[[float, float], float]
    total_mass: float
    grid_fn: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = field(
        default=None, compare=False
    )

    def eval(self, x: float, y: float) -> float:
        if math.isnan(x) or x < 0.0:
            raise ConfigError(f"residual threshold must be >= 0, got {x}")
        return float(self.eval_fn(x, y))

    def eval_grid(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if self.grid_fn is not None:
            out = np.asarray(self.grid_fn(xs, ys), dtype=float)
            if out.shape != (xs.size, ys.size):
                raise ConfigError("grid_fn returned a wrong-shaped table")
            return out
        return np.array([[self.eval(x, y) for y in ys] for x in xs])


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def quadrant_mass(m: PointMeasure, x: float, y: float) -> float:
    """Mass of the closed quadrant [x, oo) x [y, oo)."""
    return m.quadrant_mass(x, y)


def _scaled(m: PointMeasure, r: float) -> PointMeasure:
    if not (r > 0.0 and math.isfinite(r)):
        raise ConfigError(f"scaling parameter must be positive and finite, got {r}")
    return PointMeasure(m.residuals, m.leads / r, m.weights / r)


def scale_diffusion(m: PointMeasure, r: float) -> PointMeasure:
    """Diffusion-scale a snapshot taken at unscaled time r^2 t:
    residuals kept, leads divided by r, mass divided by r."""
    return _scaled(m, r)


def scale_fluid(m: PointMeasure, r: float) -> PointMeasure:
    """Fluid-scale a snapshot taken at unscaled time r t; same point map
    as the diffusion scaling -- only the time change differs."""
    return _scaled(m, r)


@dataclass(frozen=True)
class LeadProfile:
    """Lead marginal of a point measure, queryable from both tails."""

    leads: np.ndarray  # sorted
    cum_weights: np.ndarray  # cumulative weights in sorted order

    @property
    def total_mass(self) -> float:
        return float(self.cum_weights[-1]) if self.cum_weights.size else 0.0

    def survival(self, y: float) -> float:
        """Mass with lead >= y."""
        if self.cum_weights.size == 0:
            return 0.0
        i = int(np.searchsorted(self.leads, y, side="left"))
        below = self.cum_weights[i - 1] if i > 0 else 0.0
        return float(self.total_mass - below)

    def cdf(self, y: float) -> float:
        """Mass with lead <= y."""
        if self.cum_weights.size == 0:
            return 0.0
        i = int(np.searchsorted(self.leads, y, side="right"))
        return float(self.cum_weights[i - 1]) if i > 0 else 0.0


def project_lead(m: PointMeasure) -> LeadProfile:
    """Push a point measure onto its lead coordinate."""
    order = np.argsort(m.leads, kind="stable")
    return LeadProfile(m.leads[order], np.cumsum(m.weights[order]))


def mass_moment_chi(m: PointMeasure) -> float:
    """First residual moment: the workload carried by the measure."""
    if m.count == 0:
        return 0.0
    return float(np.dot(m.residuals, m.weights))


def grid_quadrant_masses(
    obj: PointMeasure | QuadrantFunction, grid: QuadrantGrid
) -> np.ndarray:
    """Tabulate closed-quadrant masses on the grid; shape (n_x, n_y)."""
    xs, ys = grid.x_values, grid.y_values
    if isinstance(obj, QuadrantFunction):
        return obj.eval_grid(xs, ys)
    if obj.count == 0:
        return np.zeros((xs.size, ys.size))
    # indicator matmul: rows over x-thresholds, columns over y-thresholds
    in_x = obj.residuals[None, :] >= xs[:, None]
    in_y = obj.leads[None, :] >= ys[:, None]
    return (in_x * obj.weights[None, :]) @ in_y.T


def quadrant_distance(
    a: PointMeasure | QuadrantFunction,
    b: PointMeasure | QuadrantFunction,
    grid: QuadrantGrid,
) -> float:
    """Max absolute mass discrepancy over the grid's closed quadrants.

    A pseudometric on states: zero distance means agreement on every
    grid quadrant, not equality of the underlying measures.
    """
    ma = grid_quadrant_masses(a, grid)
    mb = grid_quadrant_masses(b, grid)
    return float(np.abs(ma - mb).max())


def discretize_quadrant_function(
    qf: QuadrantFunction, xs: np.ndarray, ys: np.ndarray
) -> PointMeasure:
    """Approximate an analytic measure by atoms at cell centers.

    xs/ys are finite, strictly increasing edge coordinates; the cell
    [x_i, x_{i+1}) x [y_j, y_{j+1}) receives its exact mass (a mixed
    second difference of the quadrant function) at the cell center.
    Mass outside the covered rectangle is dropped, so the edges should
    extend past the effective support.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 2 or ys.size < 2 or not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise ConfigError("discretization edges must be finite arrays of length >= 2")
    table = qf.eval_grid(xs, ys)
    cell = table[:-1, :-1] - table[1:, :-1] - table[:-1, 1:] + table[1:, 1:]
    cell = np.where((cell < 0.0) & (cell > -1e-9), 0.0, cell)
    if np.any(cell < 0.0):
        raise ConfigError("quadrant function is not a measure on the given cells")
    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    keep = cell > 0.0
    ii, jj = np.nonzero(keep)
    return PointMeasure(cx[ii], cy[jj], cell[ii, jj])


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def point_measure_to_csv(m: PointMeasure, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["residual", "lead", "weight"])
        for r, l, wt in zip(m.residuals, m.leads, m.weights):
            w.writerow([_FMT % r, _FMT % l, _FMT % wt])


def quadrant_function_to_csv(qf: QuadrantFunction, grid: QuadrantGrid, path) -> None:
    table = grid_quadrant_masses(qf, grid)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "mass"])
        for i, x in enumerate(grid.x_values):
            for j, y in enumerate(grid.y_values):
                w.writerow([_FMT % x, _FMT % y, _FMT % table[i, j]])
