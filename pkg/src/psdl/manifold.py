"""Equilibrium (lifted) measures and heavy-traffic limit constants.

For a joint (service, lead) law theta with arrival rate alpha, the
invariant family indexed by total mass z > 0 puts quadrant mass

    F_z(x, y) = alpha * int_0^inf theta([x + u/z, oo) x [y + u, oo)) du

on [x, oo) x [y, oo), with F_0 = 0.  States of this exact shape are the
fixed points of the critically loaded processor-sharing dynamics: the
residual coordinate is thinned at rate 1/z per unit of elapsed service
while the lead coordinate translates at unit rate.

Closed forms are installed for the common families (exponential or
deterministic service crossed with exponential, deterministic, mixture,
or zero lead; exponential service with proportional lead = c * service);
everything else integrates the defining formula with the adaptive
Simpson scheme from ``quadrature``.

The lead-coordinate sections of these measures are the planning
profiles: the lead-profile CDF of an independent product, the
time-in-queue tail for jobs admitted with zero initial lead, the
sojourn-time limit law, and the two-regime profile under proportional
deadlines.  ``ht_params`` collects the reflected-Brownian drift and
variance constants for the workload and queue-length limits together
with the queue/workload proportionality ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .distributions import (
    Deterministic,
    EmpiricalJoint,
    Exponential,
    HyperExponential,
    JointDistribution,
    LinearJoint,
    PointMassZero,
    ProductJoint,
    ScalarDistribution,
    Uniform,
    excess_lifetime_survival,
    excess_survival_array,
    tail_integral_array,
)
from .errors import ConfigError
from .measures import QuadrantFunction
from .quadrature import integrate, truncation_point

__all__ = [
    "InvariantMeasure",
    "HeavyTrafficParams",
    "lift",
    "lead_profile_product",
    "time_in_queue_profile",
    "sojourn_limit_cdf",
    "linear_deadline_profile",
    "ht_params",
]

_METHODS = ("auto", "quadrature", "closed_form_product", "closed_form_linear", "closed_form_tiq")


@dataclass(frozen=True)
class InvariantMeasure:
    """The mass-z member of the invariant family for (joint, alpha)."""

    joint: JointDistribution
    alpha: float
    z: float
    method: str
    quadrant: QuadrantFunction

    def eval(self, x: float, y: float) -> float:
        """Mass of the closed quadrant [x, oo) x [y, oo); y may be -inf."""
        return self.quadrant.eval(x, y)

    def eval_grid(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return self.quadrant.eval_grid(xs, ys)

    @property
    def total_mass(self) -> float:
        return self.quadrant.total_mass


# ---------------------------------------------------------------------------
# closed-form builders; each returns a vectorized grid function, the
# scalar eval just runs it on a 1 x 1 grid
# ---------------------------------------------------------------------------


def _from_grid_fn(grid_fn: Callable, total: float) -> QuadrantFunction:
    def ev(x: float, y: float) -> float:
        return float(grid_fn(np.array([x]), np.array([y]))[0, 0])

    return QuadrantFunction(eval_fn=ev, total_mass=total, grid_fn=grid_fn)


def _shifted_exp_integral_grid(lam: ScalarDistribution, ys: np.ndarray, s: float) -> np.ndarray:
    """H(y) = int_0^inf e^{-s u} P(lead >= y + u) du for scalar lead laws."""
    ys = np.asarray(ys, dtype=float)
    if isinstance(lam, PointMassZero):
        up = np.where(np.isneginf(ys), np.inf, np.maximum(-ys, 0.0))
        return (1.0 - np.exp(-s * up)) / s
    if isinstance(lam, Exponential):
        m = lam.rate
        yn = np.minimum(ys, 0.0)
        yp = np.maximum(ys, 0.0)
        e = np.exp(s * yn)  # 0 at y = -inf
        return np.where(ys >= 0.0, np.exp(-m * yp) / (s + m), (1.0 - e) / s + e / (s + m))
    if isinstance(lam, Deterministic):
        up = np.maximum(lam.value - ys, 0.0)  # +inf at y = -inf
        return (1.0 - np.exp(-s * up)) / s
    if isinstance(lam, HyperExponential):
        out = np.zeros(ys.shape)
        for w, r in zip(lam.weights, lam.rates):
            out = out + w * _shifted_exp_integral_grid(Exponential(r), ys, s)
        return out
    raise ConfigError(f"no closed form for lead law {lam.kind!r} with exponential service")


def _exp_service_builder(nu: Exponential, lam: ScalarDistribution, alpha: float, z: float):
    n = nu.rate
    s = n / z

    def grid_fn(xs, ys):
        h = _shifted_exp_integral_grid(lam, ys, s)
        return alpha * np.exp(-n * np.asarray(xs, dtype=float))[:, None] * h[None, :]

    return grid_fn


def _det_lead_builder(nu: ScalarDistribution, lead_value: float, alpha: float, z: float):
    # lead fixed at lead_value: the u-integral runs while y + u <= lead_value
    def grid_fn(xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        window = np.where(np.isneginf(ys), np.inf, np.maximum(lead_value - ys, 0.0))
        t0 = tail_integral_array(nu, xs)[:, None]
        t1 = tail_integral_array(nu, xs[:, None] + window[None, :] / z)
        return alpha * z * (t0 - t1)

    return grid_fn


def _det_service_builder(nu: Deterministic, lam: ScalarDistribution, alpha: float, z: float):
    d = nu.value

    def grid_fn(xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        span = z * np.maximum(d - xs, 0.0)  # u-window where the service tail is 1
        neg = np.isneginf(ys)
        ysf = np.where(neg, 0.0, ys)
        t0 = tail_integral_array(lam, ysf)[None, :]
        t1 = tail_integral_array(lam, ysf[None, :] + span[:, None])
        out = alpha * (t0 - t1)
        if np.any(neg):
            out[:, neg] = alpha * span[:, None]
        return out

    return grid_fn


def _linear_exp_builder(nu: Exponential, c: float, alpha: float, z: float):
    n = nu.rate

    def grid_fn(xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        x, y = np.broadcast_arrays(xs[:, None], ys[None, :])
        out = np.empty(x.shape)
        if z <= c:
            low = y <= c * x  # deadline line dominated by the residual line
            out[low] = (alpha / n) * z * np.exp(-n * x[low])
            hi = ~low
            if np.any(hi):
                lead_term = c * np.exp(-n * y[hi] / c)
                if z == c:
                    out[hi] = (alpha / n) * lead_term
                else:
                    cross = (y[hi] - z * x[hi]) / (c - z)
                    out[hi] = (alpha / n) * (lead_term - (c - z) * np.exp(-n * cross))
        else:
            hi = y >= c * x
            out[hi] = (alpha / n) * c * np.exp(-n * y[hi] / c)
            low = ~hi
            if np.any(low):
                cross = (z * x[low] - y[low]) / (z - c)  # +inf at y = -inf
                out[low] = (alpha / n) * (z * np.exp(-n * x[low]) + (c - z) * np.exp(-n * cross))
        return out

    return grid_fn


# ---------------------------------------------------------------------------
# quadrature fallback
# ---------------------------------------------------------------------------


def _service_upper(joint: JointDistribution) -> float:
    if isinstance(joint, (ProductJoint, LinearJoint)):
        return joint.service.support_upper()
    assert isinstance(joint, EmpiricalJoint)
    return max(s for s, _ in joint.points)


def _lead_upper(joint: JointDistribution) -> float:
    if isinstance(joint, ProductJoint):
        return joint.lead.support_upper()
    if isinstance(joint, LinearJoint):
        return joint.c * joint.service.support_upper()
    assert isinstance(joint, EmpiricalJoint)
    return max(l for _, l in joint.points)


def _service_breaks(joint: JointDistribution) -> tuple[float, ...]:
    if isinstance(joint, (ProductJoint, LinearJoint)):
        return joint.service.breakpoints()
    assert isinstance(joint, EmpiricalJoint)
    return tuple(sorted({s for s, _ in joint.points}))


def _lead_breaks(joint: JointDistribution) -> tuple[float, ...]:
    if isinstance(joint, ProductJoint):
        return joint.lead.breakpoints()
    if isinstance(joint, LinearJoint):
        return tuple(joint.c * s for s in joint.service.breakpoints())
    assert isinstance(joint, EmpiricalJoint)
    return tuple(sorted({l for _, l in joint.points}))


def _quadrature_builder(joint: JointDistribution, alpha: float, z: float, tol: float):
    mean = joint.mean_service()
    step = z * mean / 50.0

    def ev(x: float, y: float) -> float:
        def g(u: float) -> float:
            return joint.quadrant_survival(x + u / z, y + u)

        bounds = []
        su = _service_upper(joint)
        if math.isfinite(su):
            bounds.append(z * max(su - x, 0.0))
        lu = _lead_upper(joint)
        if not math.isinf(y) and math.isfinite(lu):
            bounds.append(max(lu - y, 0.0))
        if bounds:
            upper = min(bounds)
        else:
            upper = truncation_point(g, start=max(z * mean, 1.0))
        if upper <= 0.0:
            return 0.0

        cuts = [z * (s - x) for s in _service_breaks(joint)]
        if not math.isinf(y):
            cuts.extend(l - y for l in _lead_breaks(joint))
            if isinstance(joint, LinearJoint) and z != joint.c:
                cuts.append(z * (y - joint.c * x) / (joint.c - z))
        cuts = [u for u in cuts if 0.0 < u < upper]
        return alpha * integrate(
            g, 0.0, upper, tol=tol / alpha, breakpoints=cuts, initial_step=step
        )

    return ev


# ---------------------------------------------------------------------------
# lift
# ---------------------------------------------------------------------------


def _resolve_method(joint: JointDistribution) -> str:
    if isinstance(joint, ProductJoint):
        if isinstance(joint.lead, PointMassZero):
            return "closed_form_tiq"
        if isinstance(joint.service, Exponential) and isinstance(
            joint.lead, (Exponential, Deterministic, HyperExponential)
        ):
            return "closed_form_product"
        if isinstance(joint.service, Deterministic) or isinstance(joint.lead, Deterministic):
            return "closed_form_product"
        return "quadrature"
    if isinstance(joint, LinearJoint):
        return "closed_form_linear" if isinstance(joint.service, Exponential) else "quadrature"
    return "quadrature"


def lift(
    joint: JointDistribution,
    alpha: float,
    z: float,
    *,
    method: str = "auto",
    tol: float = 1e-6,
) -> InvariantMeasure:
    """Mass-z member of the invariant family for (joint, alpha).

    method "auto" picks a closed form when one is installed for the
    family and falls back to adaptive quadrature; naming a closed form
    explicitly raises ConfigError when it does not apply.  z = 0 gives
    the zero measure.
    """
    if method not in _METHODS:
        raise ConfigError(f"unknown lift method {method!r}; expected one of {_METHODS}")
    if not (alpha > 0.0 and math.isfinite(alpha)):
        raise ConfigError(f"arrival rate must be positive and finite, got {alpha}")
    if not (z >= 0.0 and math.isfinite(z)):
        raise ConfigError(f"total mass must be nonnegative and finite, got {z}")

    resolved = _resolve_method(joint)
    if method == "quadrature":
        resolved = "quadrature"
    elif method != "auto" and method != resolved:
        raise ConfigError(
            f"method {method!r} does not apply to this family (resolved {resolved!r})"
        )

    total = alpha * z * joint.mean_service()
    if z == 0.0:
        qf = QuadrantFunction(
            eval_fn=lambda x, y: 0.0,
            total_mass=0.0,
            grid_fn=lambda xs, ys: np.zeros((np.size(xs), np.size(ys))),
        )
        return InvariantMeasure(joint, alpha, 0.0, resolved, qf)

    if resolved == "closed_form_tiq":
        assert isinstance(joint, ProductJoint)
        qf = _from_grid_fn(_det_lead_builder(joint.service, 0.0, alpha, z), total)
    elif resolved == "closed_form_product":
        assert isinstance(joint, ProductJoint)
        if isinstance(joint.service, Exponential) and isinstance(
            joint.lead, (Exponential, Deterministic, HyperExponential)
        ):
            qf = _from_grid_fn(_exp_service_builder(joint.service, joint.lead, alpha, z), total)
        elif isinstance(joint.service, Deterministic):
            qf = _from_grid_fn(_det_service_builder(joint.service, joint.lead, alpha, z), total)
        else:
            assert isinstance(joint.lead, Deterministic)
            qf = _from_grid_fn(
                _det_lead_builder(joint.service, joint.lead.value, alpha, z), total
            )
    elif resolved == "closed_form_linear":
        assert isinstance(joint, LinearJoint) and isinstance(joint.service, Exponential)
        qf = _from_grid_fn(_linear_exp_builder(joint.service, joint.c, alpha, z), total)
    else:
        qf = QuadrantFunction(
            eval_fn=_quadrature_builder(joint, alpha, z, tol), total_mass=total
        )
    return InvariantMeasure(joint, alpha, z, resolved, qf)


# ---------------------------------------------------------------------------
# lead-coordinate profiles
# ---------------------------------------------------------------------------


def lead_profile_product(
    nu: ScalarDistribution,
    lam: ScalarDistribution,
    alpha: float,
    z: float,
    y: float,
    *,
    tol: float = 1e-6,
) -> float:
    """Lead-profile CDF of the invariant measure for independent
    (service, lead): the mass with lead coordinate <= y.

    The lead marginal is absolutely continuous for z > 0, so this is
    total mass minus the quadrant mass at (0, y); tends to the total
    (z under critical normalization) as y -> +inf.
    """
    if z == 0.0:
        return 0.0
    meas = lift(ProductJoint(nu, lam), alpha, z, tol=tol)
    return meas.total_mass - meas.eval(0.0, y)


def time_in_queue_profile(nu: ScalarDistribution, z: float, y: float) -> float:
    """Mass of jobs whose elapsed waiting time is >= y when every job
    arrives with zero initial lead, normalized so the total mass is z.

    Equals z * excess_survival(y / z); the zero-lead invariant state
    ages jobs at unit rate, so elapsed times follow the scaled
    excess-lifetime law of the service distribution.
    """
    if y < 0.0 or math.isnan(y):
        raise ConfigError(f"elapsed time must be >= 0, got {y}")
    if not (z >= 0.0):
        raise ConfigError(f"total mass must be >= 0, got {z}")
    if z == 0.0:
        return 0.0
    return z * excess_lifetime_survival(nu, y / z)


def sojourn_limit_cdf(nu: ScalarDistribution, z: float, y: float) -> float:
    """Limit law of the (diffusion-scaled) sojourn time of a job entering
    when the scaled queue mass sits at z: P(z * service < y)."""
    if not (z > 0.0 and math.isfinite(z)):
        raise ConfigError(f"queue mass must be positive, got {z}")
    if y <= 0.0:
        return 0.0
    # strict inequality: survival is closed, so 1 - survival is P(X < t)
    return 1.0 - nu.survival(y / z)


def linear_deadline_profile(
    nu: ScalarDistribution, c: float, z: float, y: float
) -> float:
    """Lead-profile survival (mass with lead >= y) of the invariant
    measure under proportional deadlines lead = c * service.

    For z <= c no mass sits at negative leads: every job still in the
    system is ahead of its deadline.  For z > c a residue of late mass
    appears below zero.
    """
    if not (c > 0.0 and math.isfinite(c)):
        raise ConfigError(f"deadline ratio must be positive, got {c}")
    if not (z >= 0.0 and math.isfinite(z)):
        raise ConfigError(f"total mass must be nonnegative, got {z}")
    if z == 0.0:
        return 0.0
    ex = lambda w: excess_lifetime_survival(nu, w)
    if z <= c:
        if y <= 0.0:
            return z
        if z == c:
            return c * ex(y / c)
        return c * ex(y / c) - (c - z) * ex(y / (c - z))
    if y <= 0.0:
        return z + (c - z) * ex(y / (c - z))
    return c * ex(y / c)


# ---------------------------------------------------------------------------
# heavy-traffic constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HeavyTrafficParams:
    """Limit constants for a critically loaded sequence.

    alpha: limiting arrival rate (service mean is 1/alpha).
    interarrival_std / service_std: limiting standard deviations of one
    interarrival time and one service time.
    gamma: limit of r * (1 - rho_r), the capacity slack rate; appears
    as the negative drift of the limiting workload.
    queue_workload_ratio: proportionality constant between the limiting
    queue mass and workload.
    workload_* / queue_*: drift and variance of the two reflected
    Brownian limits.
    """

    alpha: float
    interarrival_std: float
    service_std: float
    gamma: float
    queue_workload_ratio: float
    workload_drift: float
    workload_var: float
    queue_drift: float
    queue_var: float


def ht_params(
    alpha: float, interarrival_std: float, service_std: float, gamma: float
) -> HeavyTrafficParams:
    """Reflected-Brownian limit constants for (alpha, a, b, gamma)."""
    if not (alpha > 0.0 and math.isfinite(alpha)):
        raise ConfigError(f"arrival rate must be positive, got {alpha}")
    if interarrival_std < 0.0 or service_std < 0.0:
        raise ConfigError("standard deviations must be nonnegative")
    if gamma < 0.0:
        raise ConfigError(f"slack rate must be nonnegative, got {gamma}")
    a2, b2 = interarrival_std**2, service_std**2
    ratio = 2.0 * alpha / (1.0 + alpha**2 * b2)
    w_var = alpha * (a2 + b2)
    return HeavyTrafficParams(
        alpha=alpha,
        interarrival_std=interarrival_std,
        service_std=service_std,
        gamma=gamma,
        queue_workload_ratio=ratio,
        workload_drift=-gamma,
        workload_var=w_var,
        queue_drift=-gamma * ratio,
        queue_var=ratio**2 * w_var,
    )
