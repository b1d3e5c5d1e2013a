"""Job-size and lead-time models.

Scalar families describe a single nonnegative quantity (a service
requirement or an initial lead time).  Joint laws describe the pair
(service, lead) attached to each arriving job: an independent product,
a linear coupling lead = c * service, or an empirical weighted point
set for arbitrary dependence.

Scalar survival functions use the closed convention

    survival(x) = P(X >= x),

so distributions with atoms (deterministic, the point mass at zero)
include the atom at the threshold.  The excess-lifetime transform of a
scalar law with mean m and survival S is the density S(x)/m on [0, oo);
its survival is available in closed form for every scalar family here.

``check_assumptions`` bundles the admissibility conditions a joint law
must satisfy before it can drive a heavy-traffic experiment with
arrival rate alpha: no service atom at zero, a finite (4 + p)-th
service moment, and service mean equal to 1/alpha.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .errors import ConfigError

__all__ = [
    "ScalarDistribution",
    "Exponential",
    "Deterministic",
    "Uniform",
    "HyperExponential",
    "PointMassZero",
    "JointDistribution",
    "ProductJoint",
    "LinearJoint",
    "EmpiricalJoint",
    "scalar_from_spec",
    "scalar_to_spec",
    "joint_from_spec",
    "joint_to_spec",
    "excess_lifetime_survival",
    "quadrant_survival",
    "AssumptionCheck",
    "AssumptionReport",
    "check_assumptions",
]


# ---------------------------------------------------------------------------
# scalar families
# ---------------------------------------------------------------------------


class ScalarDistribution(ABC):
    """A nonnegative scalar law with closed-form moments and sampling."""

    kind: ClassVar[str]

    @abstractmethod
    def mean(self) -> float: ...

    @abstractmethod
    def moment(self, k: float) -> float:
        """k-th raw moment E[X^k] for real k >= 0."""

    @abstractmethod
    def survival(self, x: float) -> float:
        """P(X >= x); equals 1 for x <= 0."""

    @abstractmethod
    def quantile(self, q: float) -> float:
        """Smallest x with P(X <= x) >= q, for q in [0, 1)."""

    @abstractmethod
    def sample(self, rng: np.random.Generator) -> float: ...

    @abstractmethod
    def excess_survival(self, x: float) -> float:
        """Survival of the excess-lifetime law; 1 for x <= 0."""

    def variance(self) -> float:
        return self.moment(2.0) - self.mean() ** 2

    def std(self) -> float:
        return math.sqrt(max(self.variance(), 0.0))

    def cdf(self, x: float) -> float:
        """P(X <= x).  Coincides with 1 - survival wherever X has no atom."""
        return 1.0 - self.survival(x) + self.mass_at(x)

    def mass_at(self, x: float) -> float:
        """P(X = x); zero for the continuous families."""
        return 0.0

    def breakpoints(self) -> tuple[float, ...]:
        """Points where the survival function has a kink or a jump."""
        return ()

    def support_upper(self) -> float:
        """Supremum of the support (may be inf)."""
        return math.inf

    def excess_mean(self) -> float:
        """Mean of the excess-lifetime law: E[X^2] / (2 E[X])."""
        m = self.mean()
        if m <= 0.0:
            raise ConfigError("excess lifetime undefined for zero-mean law")
        return self.moment(2.0) / (2.0 * m)

    def tail_integral(self, w: float) -> float:
        """int_w^inf P(X >= u) du, defined for any real w.

        Equals mean * excess_survival(w) for w >= 0 and mean - w below.
        """
        if w < 0.0:
            return self.mean() - w
        m = self.mean()
        if m == 0.0:
            return 0.0
        return m * self.excess_survival(w)


@dataclass(frozen=True)
class Exponential(ScalarDistribution):
    rate: float
    kind: ClassVar[str] = "exponential"

    def __post_init__(self):
        if not (self.rate > 0.0 and math.isfinite(self.rate)):
            raise ConfigError(f"exponential rate must be positive, got {self.rate}")

    def mean(self) -> float:
        return 1.0 / self.rate

    def moment(self, k: float) -> float:
        return math.gamma(k + 1.0) / self.rate**k

    def survival(self, x: float) -> float:
        return 1.0 if x <= 0.0 else math.exp(-self.rate * x)

    def quantile(self, q: float) -> float:
        _check_q(q)
        return -math.log1p(-q) / self.rate

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.exponential(1.0 / self.rate))

    def excess_survival(self, x: float) -> float:
        # memoryless: the excess law is the law itself
        return self.survival(x)


@dataclass(frozen=True)
class Deterministic(ScalarDistribution):
    value: float
    kind: ClassVar[str] = "deterministic"

    def __post_init__(self):
        if not (self.value > 0.0 and math.isfinite(self.value)):
            raise ConfigError(f"deterministic value must be positive, got {self.value}")

    def mean(self) -> float:
        return self.value

    def moment(self, k: float) -> float:
        return self.value**k

    def survival(self, x: float) -> float:
        return 1.0 if x <= self.value else 0.0

    def quantile(self, q: float) -> float:
        _check_q(q)
        return self.value

    def sample(self, rng: np.random.Generator) -> float:
        return self.value

    def excess_survival(self, x: float) -> float:
        # uniform on [0, value]
        if x <= 0.0:
            return 1.0
        if x >= self.value:
            return 0.0
        return 1.0 - x / self.value

    def mass_at(self, x: float) -> float:
        return 1.0 if x == self.value else 0.0

    def breakpoints(self) -> tuple[float, ...]:
        return (self.value,)

    def support_upper(self) -> float:
        return self.value


@dataclass(frozen=True)
class Uniform(ScalarDistribution):
    lo: float
    hi: float
    kind: ClassVar[str] = "uniform"

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi and math.isfinite(self.hi)):
            raise ConfigError(f"uniform needs 0 <= lo < hi, got [{self.lo}, {self.hi}]")

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def moment(self, k: float) -> float:
        lo, hi = self.lo, self.hi
        return (hi ** (k + 1.0) - lo ** (k + 1.0)) / ((k + 1.0) * (hi - lo))

    def survival(self, x: float) -> float:
        if x <= self.lo:
            return 1.0
        if x >= self.hi:
            return 0.0
        return (self.hi - x) / (self.hi - self.lo)

    def quantile(self, q: float) -> float:
        _check_q(q)
        return self.lo + q * (self.hi - self.lo)

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.lo, self.hi))

    def excess_survival(self, x: float) -> float:
        # integrated tail: int_x^inf survival, normalized by the mean
        if x <= self.lo:
            tail = (self.lo - x) + 0.5 * (self.hi - self.lo)
        elif x < self.hi:
            tail = 0.5 * (self.hi - x) ** 2 / (self.hi - self.lo)
        else:
            return 0.0
        return tail / self.mean()

    def breakpoints(self) -> tuple[float, ...]:
        return (self.lo, self.hi)

    def support_upper(self) -> float:
        return self.hi


@dataclass(frozen=True)
class HyperExponential(ScalarDistribution):
    """Mixture of exponentials: with probability weights[i], rate rates[i]."""

    weights: tuple[float, ...]
    rates: tuple[float, ...]
    kind: ClassVar[str] = "hyperexponential"

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if len(self.weights) != len(self.rates) or not self.weights:
            raise ConfigError("hyperexponential needs matching nonempty weights/rates")
        if any(w <= 0.0 for w in self.weights) or any(r <= 0.0 for r in self.rates):
            raise ConfigError("hyperexponential weights and rates must be positive")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ConfigError("hyperexponential weights must sum to 1")

    def mean(self) -> float:
        return sum(w / r for w, r in zip(self.weights, self.rates))

    def moment(self, k: float) -> float:
        g = math.gamma(k + 1.0)
        return sum(w * g / r**k for w, r in zip(self.weights, self.rates))

    def survival(self, x: float) -> float:
        if x <= 0.0:
            return 1.0
        return sum(w * math.exp(-r * x) for w, r in zip(self.weights, self.rates))

    def quantile(self, q: float) -> float:
        _check_q(q)
        if q == 0.0:
            return 0.0
        # strictly decreasing continuous survival: bisect on cdf
        lo, hi = 0.0, 1.0
        while 1.0 - self.survival(hi) < q:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if 1.0 - self.survival(mid) < q:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def sample(self, rng: np.random.Generator) -> float:
        u = rng.random()
        acc = 0.0
        idx = len(self.rates) - 1
        for i, w in enumerate(self.weights):
            acc += w
            if u < acc:
                idx = i
                break
        return float(rng.exponential(1.0 / self.rates[idx]))

    def excess_survival(self, x: float) -> float:
        if x <= 0.0:
            return 1.0
        tail = sum(
            w * math.exp(-r * x) / r for w, r in zip(self.weights, self.rates)
        )
        return tail / self.mean()


@dataclass(frozen=True)
class PointMassZero(ScalarDistribution):
    """Unit mass at zero.  Valid as a lead-time law (all leads zero);
    inadmissible as a service law."""

    kind: ClassVar[str] = "pointmass_zero"

    def mean(self) -> float:
        return 0.0

    def moment(self, k: float) -> float:
        return 1.0 if k == 0.0 else 0.0

    def survival(self, x: float) -> float:
        return 1.0 if x <= 0.0 else 0.0

    def quantile(self, q: float) -> float:
        _check_q(q)
        return 0.0

    def sample(self, rng: np.random.Generator) -> float:
        return 0.0

    def excess_survival(self, x: float) -> float:
        raise ConfigError("excess lifetime undefined for the point mass at zero")

    def mass_at(self, x: float) -> float:
        return 1.0 if x == 0.0 else 0.0

    def breakpoints(self) -> tuple[float, ...]:
        return (0.0,)

    def support_upper(self) -> float:
        return 0.0


def _check_q(q: float) -> None:
    if not (0.0 <= q < 1.0):
        raise ConfigError(f"quantile level must lie in [0, 1), got {q}")


_SCALAR_KINDS: dict[str, type] = {
    c.kind: c for c in (Exponential, Deterministic, Uniform, HyperExponential, PointMassZero)
}


def scalar_from_spec(spec: dict) -> ScalarDistribution:
    """Build a scalar law from a plain dict like {"kind": "exponential", "rate": 2.0}."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"scalar distribution spec must be a dict with 'kind': {spec!r}")
    kind = spec["kind"]
    params = {k: v for k, v in spec.items() if k != "kind"}
    cls = _SCALAR_KINDS.get(kind)
    if cls is None:
        raise ConfigError(f"unknown scalar distribution kind {kind!r}")
    if kind == "hyperexponential":
        try:
            params = {"weights": tuple(params["weights"]), "rates": tuple(params["rates"])}
        except KeyError as exc:
            raise ConfigError(f"hyperexponential spec missing {exc}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {kind!r}: {exc}") from None


def scalar_to_spec(d: ScalarDistribution) -> dict:
    out: dict = {"kind": d.kind}
    if isinstance(d, Exponential):
        out["rate"] = d.rate
    elif isinstance(d, Deterministic):
        out["value"] = d.value
    elif isinstance(d, Uniform):
        out.update(lo=d.lo, hi=d.hi)
    elif isinstance(d, HyperExponential):
        out.update(weights=list(d.weights), rates=list(d.rates))
    return out


def excess_lifetime_survival(dist: ScalarDistribution, x: float) -> float:
    """Survival of the excess-lifetime (equilibrium) law of ``dist`` at x.

    Equals (1/m) * int_x^inf P(X >= u) du with m the mean of ``dist``;
    returns 1 for x <= 0.
    """
    return dist.excess_survival(x)


def excess_survival_array(dist: ScalarDistribution, x: np.ndarray) -> np.ndarray:
    """Vectorized ``excess_survival``; x may contain +/-inf."""
    x = np.asarray(x, dtype=float)
    if isinstance(dist, Exponential):
        return np.exp(-dist.rate * np.maximum(x, 0.0))
    if isinstance(dist, Deterministic):
        return np.clip(1.0 - x / dist.value, 0.0, 1.0)
    if isinstance(dist, Uniform):
        lo, hi, m = dist.lo, dist.hi, dist.mean()
        xx = np.minimum(x, hi)
        tail = np.where(
            xx <= lo,
            (lo - xx) + 0.5 * (hi - lo),
            0.5 * np.square(hi - xx) / (hi - lo),
        )
        return np.where(x >= hi, 0.0, tail / m)
    if isinstance(dist, HyperExponential):
        xx = np.maximum(x, 0.0)
        tail = sum(
            w * np.exp(-r * xx) / r for w, r in zip(dist.weights, dist.rates)
        )
        return tail / dist.mean()
    out = np.empty(x.shape)
    flat, src = out.ravel(), x.ravel()
    for i, v in enumerate(src):
        flat[i] = dist.excess_survival(float(v))
    return out


def tail_integral_array(dist: ScalarDistribution, w: np.ndarray) -> np.ndarray:
    """Vectorized ``tail_integral``; w may contain -inf (giving +inf)."""
    w = np.asarray(w, dtype=float)
    m = dist.mean()
    pos = m * excess_survival_array(dist, np.maximum(w, 0.0)) if m > 0.0 else np.zeros(w.shape)
    return np.where(w < 0.0, m - w, pos)


# ---------------------------------------------------------------------------
# joint laws on the half-plane (service > 0, lead real)
# ---------------------------------------------------------------------------


class JointDistribution(ABC):
    """Law of the (service, lead) pair attached to an arriving job."""

    kind: ClassVar[str]

    @abstractmethod
    def quadrant_survival(self, x: float, y: float) -> float:
        """Mass of the closed quadrant [x, oo) x [y, oo); x must be >= 0,
        y may be any real or -inf (giving the service marginal survival)."""

    @abstractmethod
    def sample(self, rng: np.random.Generator) -> tuple[float, float]: ...

    @abstractmethod
    def mean_service(self) -> float: ...

    @abstractmethod
    def service_moment(self, k: float) -> float: ...

    @abstractmethod
    def service_mass_at_zero(self) -> float: ...

    moment_exponent: float

    def service_std(self) -> float:
        v = self.service_moment(2.0) - self.mean_service() ** 2
        return math.sqrt(max(v, 0.0))

    def _check_x(self, x: float) -> None:
        if math.isnan(x) or x < 0.0:
            raise ConfigError(f"residual threshold must be >= 0, got {x}")


@dataclass(frozen=True)
class ProductJoint(JointDistribution):
    """Independent service and lead."""

    service: ScalarDistribution
    lead: ScalarDistribution
    moment_exponent: float = 1.0
    kind: ClassVar[str] = "product"

    def __post_init__(self):
        if self.moment_exponent <= 0.0:
            raise ConfigError("moment_exponent must be positive")

    def quadrant_survival(self, x: float, y: float) -> float:
        self._check_x(x)
        lead_surv = 1.0 if y == -math.inf else self.lead.survival(y)
        return self.service.survival(x) * lead_surv

    def sample(self, rng: np.random.Generator) -> tuple[float, float]:
        # fixed draw order (service, then lead) keeps streams reproducible
        v = self.service.sample(rng)
        l = self.lead.sample(rng)
        return v, l

    def mean_service(self) -> float:
        return self.service.mean()

    def service_moment(self, k: float) -> float:
        return self.service.moment(k)

    def service_mass_at_zero(self) -> float:
        return self.service.mass_at(0.0)


@dataclass(frozen=True)
class LinearJoint(JointDistribution):
    """Lead proportional to service: lead = c * service, c > 0."""

    service: ScalarDistribution
    c: float
    moment_exponent: float = 1.0
    kind: ClassVar[str] = "linear"

    def __post_init__(self):
        if not (self.c > 0.0 and math.isfinite(self.c)):
            raise ConfigError(f"linear coupling needs c > 0, got {self.c}")
        if self.moment_exponent <= 0.0:
            raise ConfigError("moment_exponent must be positive")

    def quadrant_survival(self, x: float, y: float) -> float:
        # {v >= x, c v >= y} collapses to a single service tail
        self._check_x(x)
        threshold = x if y == -math.inf else max(x, y / self.c)
        return self.service.survival(threshold)

    def sample(self, rng: np.random.Generator) -> tuple[float, float]:
        v = self.service.sample(rng)
        return v, self.c * v

    def mean_service(self) -> float:
        return self.service.mean()

    def service_moment(self, k: float) -> float:
        return self.service.moment(k)

    def service_mass_at_zero(self) -> float:
        return self.service.mass_at(0.0)


@dataclass(frozen=True)
class EmpiricalJoint(JointDistribution):
    """Finite weighted point set {(service_i, lead_i, w_i)}, weights summing to 1."""

    points: tuple[tuple[float, float], ...]
    weights: tuple[float, ...] | None = None
    moment_exponent: float = 1.0
    kind: ClassVar[str] = "empirical"

    def __post_init__(self):
        pts = tuple((float(s), float(l)) for s, l in self.points)
        object.__setattr__(self, "points", pts)
        if not pts:
            raise ConfigError("empirical joint law needs at least one point")
        if any(s < 0.0 for s, _ in pts):
            raise ConfigError("empirical service coordinates must be >= 0")
        if self.weights is None:
            w = tuple(1.0 / len(pts) for _ in pts)
        else:
            w = tuple(float(x) for x in self.weights)
            if len(w) != len(pts):
                raise ConfigError("empirical weights must match points")
            if any(x <= 0.0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
                raise ConfigError("empirical weights must be positive and sum to 1")
        object.__setattr__(self, "weights", w)
        if self.moment_exponent <= 0.0:
            raise ConfigError("moment_exponent must be positive")

    def quadrant_survival(self, x: float, y: float) -> float:
        self._check_x(x)
        return sum(
            w for (s, l), w in zip(self.points, self.weights) if s >= x and l >= y
        )

    def sample(self, rng: np.random.Generator) -> tuple[float, float]:
        u = rng.random()
        acc = 0.0
        for (s, l), w in zip(self.points, self.weights):
            acc += w
            if u < acc:
                return s, l
        return self.points[-1]

    def mean_service(self) -> float:
        return sum(w * s for (s, _), w in zip(self.points, self.weights))

    def service_moment(self, k: float) -> float:
        return sum(w * s**k for (s, _), w in zip(self.points, self.weights))

    def service_mass_at_zero(self) -> float:
        return sum(w for (s, _), w in zip(self.points, self.weights) if s == 0.0)


_JOINT_KINDS = {c.kind: c for c in (ProductJoint, LinearJoint, EmpiricalJoint)}


def joint_from_spec(spec: dict) -> JointDistribution:
    """Build a joint law from a plain dict; scalar components are nested specs."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"joint distribution spec must be a dict with 'kind': {spec!r}")
    kind = spec["kind"]
    if kind not in _JOINT_KINDS:
        raise ConfigError(f"unknown joint distribution kind {kind!r}")
    p = float(spec.get("moment_exponent", 1.0))
    try:
        if kind == "product":
            return ProductJoint(
                service=scalar_from_spec(spec["service"]),
                lead=scalar_from_spec(spec["lead"]),
                moment_exponent=p,
            )
        if kind == "linear":
            return LinearJoint(
                service=scalar_from_spec(spec["service"]),
                c=float(spec["c"]),
                moment_exponent=p,
            )
        return EmpiricalJoint(
            points=tuple((float(s), float(l)) for s, l in spec["points"]),
            weights=tuple(spec["weights"]) if spec.get("weights") is not None else None,
            moment_exponent=p,
        )
    except KeyError as exc:
        raise ConfigError(f"joint spec for {kind!r} missing field {exc}") from None


def joint_to_spec(d: JointDistribution) -> dict:
    if isinstance(d, ProductJoint):
        return {
            "kind": "product",
            "service": scalar_to_spec(d.service),
            "lead": scalar_to_spec(d.lead),
            "moment_exponent": d.moment_exponent,
        }
    if isinstance(d, LinearJoint):
        return {
            "kind": "linear",
            "service": scalar_to_spec(d.service),
            "c": d.c,
            "moment_exponent": d.moment_exponent,
        }
    assert isinstance(d, EmpiricalJoint)
    return {
        "kind": "empirical",
        "points": [list(p) for p in d.points],
        "weights": list(d.weights),
        "moment_exponent": d.moment_exponent,
    }


def quadrant_survival(d: JointDistribution, x: float, y: float) -> float:
    """Mass the joint law puts on the closed quadrant [x, oo) x [y, oo)."""
    return d.quadrant_survival(x, y)


# ---------------------------------------------------------------------------
# admissibility checks for heavy-traffic experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class AssumptionReport:
    checks: tuple[AssumptionCheck, ...]
    warnings: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> tuple[AssumptionCheck, ...]:
        return tuple(c for c in self.checks if not c.passed)


def check_assumptions(d: JointDistribution, alpha: float) -> AssumptionReport:
    """Admissibility of a joint (service, lead) law at arrival rate alpha.

    Checks: no service atom at zero; finite (4 + p)-th service moment for
    the law's moment exponent p; service mean equal to 1/alpha (critical
    loading of the prelimit sequence).  Empirical laws satisfy the first
    two trivially and get a warning that finite point sets cannot attest
    uniformity along a scaling sequence.
    """
    if not (alpha > 0.0 and math.isfinite(alpha)):
        raise ConfigError(f"arrival rate must be positive and finite, got {alpha}")
    checks: list[AssumptionCheck] = []
    warnings: list[str] = []

    atom = d.service_mass_at_zero()
    checks.append(
        AssumptionCheck(
            "no_service_atom_at_zero",
            atom == 0.0,
            f"P(service = 0) = {atom}",
        )
    )

    k = 4.0 + d.moment_exponent
    mk = d.service_moment(k)
    checks.append(
        AssumptionCheck(
            "service_moment_finite",
            math.isfinite(mk),
            f"E[service^{k}] = {mk}",
        )
    )

    m = d.mean_service()
    target = 1.0 / alpha
    ok = abs(m - target) <= 1e-9 * max(1.0, target)
    checks.append(
        AssumptionCheck(
            "service_mean_matches_rate",
            ok,
            f"mean service {m} vs 1/alpha = {target}",
        )
    )

    if isinstance(d, EmpiricalJoint):
        warnings.append(
            "empirical law: moment conditions hold trivially for a finite point "
            "set and cannot be verified uniformly along a scaling sequence"
        )
    return AssumptionReport(tuple(checks), tuple(warnings))
