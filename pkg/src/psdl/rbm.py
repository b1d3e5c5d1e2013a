"""Reflected Brownian motion on [0, oo).

Euler scheme with reflection at the origin,

    X_{k+1} = max(X_k + drift * dt + sqrt(variance * dt) * N_k, 0),

evaluated blockwise with the Lindley closed form (a running sum plus a
running minimum), so long horizons stay cheap without changing the
recursion.  For negative drift the stationary law is exponential with
rate 2 |drift| / variance, which gives closed-form CDF and quantiles;
the quantile doubles as a deadline rule: the level the stationary queue
stays below with the requested probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = ["RBMSpec", "RBMPath", "simulate", "stationary_cdf", "deadline_quantile"]

_BLOCK = 1_000_000


@dataclass(frozen=True)
class RBMSpec:
    drift: float
    variance: float
    x0: float = 0.0

    def __post_init__(self):
        if not (self.variance > 0.0 and math.isfinite(self.variance)):
            raise ConfigError(f"variance must be positive, got {self.variance}")
        if not (self.x0 >= 0.0 and math.isfinite(self.x0)):
            raise ConfigError(f"x0 must be nonnegative, got {self.x0}")
        if not math.isfinite(self.drift):
            raise ConfigError(f"drift must be finite, got {self.drift}")

    @property
    def stationary_rate(self) -> float:
        if self.drift >= 0.0:
            raise ConfigError(
                f"stationary law needs negative drift, got {self.drift}"
            )
        return 2.0 * abs(self.drift) / self.variance


@dataclass(frozen=True)
class RBMPath:
    times: np.ndarray
    values: np.ndarray

    def time_average(self) -> float:
        return float(self.values.mean())


def simulate(spec: RBMSpec, horizon: float, dt: float, seed: int) -> RBMPath:
    """Euler path on the grid {0, dt, ..., n dt} covering [0, horizon]."""
    if not (horizon > 0.0 and math.isfinite(horizon)):
        raise ConfigError(f"horizon must be positive, got {horizon}")
    if not (0.0 < dt <= horizon):
        raise ConfigError(f"dt must lie in (0, horizon], got {dt}")
    n = int(math.ceil(horizon / dt - 1e-12))
    rng = np.random.default_rng(seed)
    values = np.empty(n + 1)
    values[0] = spec.x0
    scale = math.sqrt(spec.variance * dt)
    mu = spec.drift * dt
    x = spec.x0
    pos = 1
    while pos <= n:
        m = min(_BLOCK, n - pos + 1)
        steps = mu + scale * rng.standard_normal(m)
        s = np.cumsum(steps)
        # Lindley: X_k = S_k + max(x, -min_{j<=k} S_j)
        block = s + np.maximum(x, -np.minimum.accumulate(s))
        values[pos : pos + m] = block
        x = block[-1]
        pos += m
    return RBMPath(times=np.arange(n + 1) * dt, values=values)


def stationary_cdf(spec: RBMSpec, x: float) -> float:
    """P(X_inf <= x) = 1 - exp(-2 |drift| x / variance); needs drift < 0."""
    rate = spec.stationary_rate
    if x <= 0.0:
        return 0.0
    return -math.expm1(-rate * x)


def deadline_quantile(spec: RBMSpec, q: float) -> float:
    """Level the stationary process stays below with probability q."""
    if not (0.0 <= q < 1.0):
        raise ConfigError(f"quantile level must lie in [0, 1), got {q}")
    rate = spec.stationary_rate
    return -math.log1p(-q) / rate
