"""Stone's approximation, its one-term refinement and the Edgeworth CDF expansion.

All probabilities are on the interval-probability scale ``P(S_n in [x, x+delta))``;
divide by ``delta`` for the per-unit-width scale.  Evaluation is done in the
normalized coordinate ``v = x / sqrt(n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
MAX_HERMITE_DEGREE = 10


@dataclass(frozen=True)
class IntervalQuery:
    n: int
    x: float
    delta: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    @property
    def v(self) -> float:
        return self.x / math.sqrt(self.n)


@dataclass(frozen=True)
class ApproxBreakdown:
    v: float
    stone_term: float
    skew_term: float
    delta_term: float
    total: float

    def per_unit(self, delta: float) -> "ApproxBreakdown":
        return ApproxBreakdown(self.v, self.stone_term / delta, self.skew_term / delta,
                               self.delta_term / delta, self.total / delta)


@dataclass(frozen=True)
class CumulantSet:
    gamma3: float
    gamma4: float

    @classmethod
    def from_moments(cls, mu3: float, mu4: float) -> "CumulantSet":
        return cls(mu3, mu4 - 3.0)


def normal_density(t):
    t = np.asarray(t, dtype=float)
    out = INV_SQRT_2PI * np.exp(-0.5 * t * t)
    return float(out) if out.ndim == 0 else out


def hermite_che(k: int, x):
    """Probabilists' Hermite polynomial He_k via the three-term recurrence."""
    if int(k) != k or k < 0:
        raise ValueError("degree must be a non-negative integer")
    if k > MAX_HERMITE_DEGREE:
        raise ValueError(f"degree {k} exceeds the cap of {MAX_HERMITE_DEGREE}")
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), x
    if k == 0:
        cur = prev
    else:
        for j in range(1, k):
            prev, cur = cur, x * cur - j * prev
    return float(cur) if cur.ndim == 0 else cur


def stone_approx(q: IntervalQuery) -> float:
    return q.delta / math.sqrt(q.n) * normal_density(q.v)


def refined_terms(mu3: float, n, x, delta):
    """Vectorized (stone, skew, delta) terms of the one-term expansion."""
    n = np.asarray(n, dtype=float)
    x = np.asarray(x, dtype=float)
    delta = np.asarray(delta, dtype=float)
    rn = np.sqrt(n)
    v = x / rn
    stone = delta / rn * normal_density(v)
    skew = stone * (mu3 * v * (v * v - 3.0) / (6.0 * rn))
    dterm = -stone * (delta * v / (2.0 * rn))
    return stone, skew, dterm


def refined_approx(dist, q: IntervalQuery) -> ApproxBreakdown:
    """One-term refinement of Stone's approximation.

    ``dist`` is anything with a ``mu3`` attribute, or the third moment itself.
    The total may be negative for large ``|v|``; it is returned unclamped.
    """
    mu3 = float(getattr(dist, "mu3", dist))
    stone, skew, dterm = (float(a) for a in refined_terms(mu3, q.n, q.x, q.delta))
    return ApproxBreakdown(q.v, stone, skew, dterm, stone + skew + dterm)


def edgeworth_cdf(cum: CumulantSet, n: int, v):
    """Two-term Edgeworth approximation of ``P(S_n / sqrt(n) < v)``."""
    v = np.asarray(v, dtype=float)
    rn = math.sqrt(n)
    g3, g4 = cum.gamma3, cum.gamma4
    corr = (g3 * hermite_che(2, v) / (6.0 * rn)
            + (g3 * g3 * hermite_che(5, v) / 72.0 + g4 * hermite_che(3, v) / 24.0) / n)
    out = ndtr(v) - normal_density(v) * corr
    return float(out) if np.ndim(out) == 0 else out


def cdf_difference_approx(cum: CumulantSet, q: IntervalQuery) -> float:
    """Interval probability obtained by differencing the Edgeworth CDF expansion
    and keeping terms through order ``1/n`` (Hermite form)."""
    rn = math.sqrt(q.n)
    v = q.v
    lead = q.delta / rn * normal_density(v)
    skew = lead * (cum.gamma3 * hermite_che(3, v) / (6.0 * rn))
    dterm = -lead * (q.delta * hermite_che(1, v) / (2.0 * rn))
    return lead + skew + dterm
