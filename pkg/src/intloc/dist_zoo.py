"""Standardized non-lattice distributions with exact characteristic functions.

Every zoo member has mean 0 and variance 1.  Moments are stored as closed-form
constants; ``tests/test_dist_zoo.py`` cross-checks them by numeric integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special, stats

SQRT3 = math.sqrt(3.0)
LAPLACE_SCALE = 1.0 / math.sqrt(2.0)

_SAMPLE_CHUNK = 1 << 22


@dataclass(frozen=True)
class DistributionSpec:
    """A standardized distribution together with everything the oracles need.

    ``chf`` and the CDF/density callables are vectorized over numpy arrays.
    ``continuous_cdf`` and ``continuous_pdf`` describe the absolutely
    continuous part only (a sub-probability when atoms are present).
    ``chf_envelope(L)`` is a non-increasing majorant of ``sup_{|t|>=L} |chf(t)|``
    and ``log_mgf`` (finite on ``|s| < mgf_radius``) feeds Chernoff tail bounds.
    """

    name: str
    chf: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    mu3: float
    mu4: float
    r: float
    abs_moment_r: float
    support: tuple[float, float]
    continuous_cdf: Callable[[np.ndarray], np.ndarray]
    continuous_pdf: Callable[[np.ndarray], np.ndarray]
    chf_envelope: Callable[[float], float]
    log_mgf: Callable[[float], float]
    mgf_radius: float
    atoms: tuple[tuple[float, float], ...] = field(default=())

    @property
    def has_atom(self) -> bool:
        return bool(self.atoms)

    @property
    def b(self) -> float:
        return self.abs_moment_r

    @property
    def support_radius(self) -> float:
        return max(-self.support[0], self.support[1])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.sampler(rng, size)

    def cdf(self, t):
        """Right-continuous CDF of the full law."""
        t = np.asarray(t, dtype=float)
        out = self.continuous_cdf(t)
        for loc, mass in self.atoms:
            out = out + mass * (t >= loc)
        return out


@dataclass(frozen=True)
class CramerScan:
    epsilon: float
    lambda_max: float
    grid_step: float
    rho_hat: float
    argmax: float


@dataclass(frozen=True)
class Standardization:
    """Affine map ``t -> (t + shift) * scale`` onto the standardized scale."""

    shift: float
    scale: float
    mu3: float

    def point(self, t: float) -> float:
        return (t + self.shift) * self.scale

    def width(self, delta: float) -> float:
        return delta * self.scale


# ---------------------------------------------------------------------------
# zoo members


def _uniform_chf(lam):
    lam = np.asarray(lam, dtype=float)
    # np.sinc(t) = sin(pi t)/(pi t)
    return np.sinc(SQRT3 * lam / np.pi).astype(complex)


def _uniform_log_mgf(s: float) -> float:
    a = SQRT3 * abs(s)
    if a < 1e-8:
        return a * a / 6.0
    # log(sinh(a)/a) without overflow
    return a + math.log1p(-math.exp(-2.0 * a)) - math.log(2.0 * a)


def _std_uniform() -> DistributionSpec:
    width = 2.0 * SQRT3
    return DistributionSpec(
        name="std_uniform",
        chf=_uniform_chf,
        sampler=lambda rng, size: rng.uniform(-SQRT3, SQRT3, size),
        mu3=0.0,
        mu4=9.0 / 5.0,
        r=4.0,
        abs_moment_r=9.0 / 5.0,
        support=(-SQRT3, SQRT3),
        continuous_cdf=lambda t: np.clip((np.asarray(t, float) + SQRT3) / width, 0.0, 1.0),
        continuous_pdf=lambda t: np.where(np.abs(np.asarray(t, float)) <= SQRT3, 1.0 / width, 0.0),
        chf_envelope=lambda L: min(1.0, 1.0 / (SQRT3 * L)) if L > 0 else 1.0,
        log_mgf=_uniform_log_mgf,
        mgf_radius=math.inf,
    )


def _exp_chf(lam):
    lam = np.asarray(lam, dtype=float)
    return np.exp(-1j * lam) / (1.0 - 1j * lam)


def _exp_cdf(t):
    t = np.asarray(t, dtype=float)
    return np.where(t > -1.0, -np.expm1(-(np.maximum(t, -1.0) + 1.0)), 0.0)


def _std_exponential() -> DistributionSpec:
    return DistributionSpec(
        name="std_exponential",
        chf=_exp_chf,
        sampler=lambda rng, size: rng.standard_exponential(size) - 1.0,
        mu3=2.0,
        mu4=9.0,
        r=4.0,
        abs_moment_r=9.0,
        support=(-1.0, math.inf),
        continuous_cdf=_exp_cdf,
        continuous_pdf=lambda t: np.where(np.asarray(t, float) >= -1.0,
                                          np.exp(-(np.asarray(t, float) + 1.0)), 0.0),
        chf_envelope=lambda L: 1.0 / math.sqrt(1.0 + L * L),
        log_mgf=lambda s: -s - math.log1p(-s),
        mgf_radius=1.0,
    )


def _std_laplace() -> DistributionSpec:
    law = stats.laplace(scale=LAPLACE_SCALE)
    return DistributionSpec(
        name="std_laplace",
        chf=lambda lam: (1.0 / (1.0 + 0.5 * np.asarray(lam, float) ** 2)).astype(complex),
        sampler=lambda rng, size: rng.laplace(0.0, LAPLACE_SCALE, size),
        mu3=0.0,
        mu4=6.0,
        r=4.0,
        abs_moment_r=6.0,
        support=(-math.inf, math.inf),
        continuous_cdf=lambda t: law.cdf(np.asarray(t, float)),
        continuous_pdf=lambda t: law.pdf(np.asarray(t, float)),
        chf_envelope=lambda L: 1.0 / (1.0 + 0.5 * L * L),
        log_mgf=lambda s: -math.log1p(-0.5 * s * s),
        mgf_radius=math.sqrt(2.0),
    )


def _atomic_sampler(rng: np.random.Generator, size: int) -> np.ndarray:
    keep = rng.random(size) < 0.5
    z = rng.normal(0.0, math.sqrt(2.0), size)
    return np.where(keep, z, 0.0)


def _atomic_log_mgf(s: float) -> float:
    # log(0.5 + 0.5 e^{s^2})
    s2 = s * s
    return s2 + math.log1p(math.exp(-s2)) - math.log(2.0)


def _atomic_mix() -> DistributionSpec:
    sd = math.sqrt(2.0)
    return DistributionSpec(
        name="atomic_mix",
        chf=lambda lam: (0.5 + 0.5 * np.exp(-np.asarray(lam, float) ** 2)).astype(complex),
        sampler=_atomic_sampler,
        mu3=0.0,
        mu4=6.0,
        r=4.0,
        abs_moment_r=6.0,
        support=(-math.inf, math.inf),
        continuous_cdf=lambda t: 0.5 * special.ndtr(np.asarray(t, float) / sd),
        continuous_pdf=lambda t: 0.5 * stats.norm.pdf(np.asarray(t, float), scale=sd),
        chf_envelope=lambda L: 0.5 + 0.5 * math.exp(-L * L),
        log_mgf=_atomic_log_mgf,
        mgf_radius=math.inf,
        atoms=((0.0, 0.5),),
    )


_BUILDERS = {
    "std_uniform": _std_uniform,
    "std_exponential": _std_exponential,
    "std_laplace": _std_laplace,
    "atomic_mix": _atomic_mix,
}

ZOO_NAMES = tuple(_BUILDERS)
_CACHE: dict[str, DistributionSpec] = {}


def builtin(name: str) -> DistributionSpec:
    """Return the zoo member called ``name``."""
    if name not in _BUILDERS:
        raise ValueError(f"unknown distribution {name!r}; valid names: {', '.join(ZOO_NAMES)}")
    if name not in _CACHE:
        _CACHE[name] = _BUILDERS[name]()
    return _CACHE[name]


def standardize(raw_mean: float, raw_sd: float, raw_mu3: float) -> Standardization:
    """Map a raw law with centered third moment ``raw_mu3`` to unit scale."""
    if not raw_sd > 0:
        raise ValueError(f"raw_sd must be positive, got {raw_sd}")
    return Standardization(shift=-raw_mean, scale=1.0 / raw_sd, mu3=raw_mu3 / raw_sd**3)


def cramer_sup(dist: DistributionSpec, epsilon: float, lambda_max: float,
               grid_step: float = 1e-3) -> CramerScan:
    """Grid scan of ``|chf|`` over ``[epsilon, lambda_max]``.

    Grid points are the multiples of ``grid_step`` inside the range, so scans
    for a larger ``epsilon`` use a subset of the points and ``rho_hat`` is
    non-increasing in ``epsilon`` by construction.
    """
    if not 0 < epsilon < lambda_max:
        raise ValueError("need 0 < epsilon < lambda_max")
    if not 0 < grid_step <= 1e-2:
        raise ValueError("grid_step must lie in (0, 1e-2]")
    k0 = math.ceil(epsilon / grid_step - 1e-9)
    k1 = math.floor(lambda_max / grid_step + 1e-9)
    if k1 < k0:
        raise ValueError("no grid points inside [epsilon, lambda_max]")
    lam = np.arange(k0, k1 + 1, dtype=float) * grid_step
    mod = np.abs(dist.chf(lam))
    i = int(np.argmax(mod))
    return CramerScan(epsilon, lambda_max, grid_step, float(min(mod[i], 1.0)), float(lam[i]))


def sample_sum(dist: DistributionSpec, n: int, seed, count: int) -> np.ndarray:
    """``count`` i.i.d. draws of ``S_n``; bit-for-bit reproducible per seed.

    Draws are generated in fixed-size row blocks so memory stays bounded and
    the stream layout does not depend on the machine.
    """
    if n < 1 or count < 1:
        raise ValueError("n and count must be positive")
    rng = np.random.default_rng(seed)
    rows = max(1, _SAMPLE_CHUNK // n)
    out = np.empty(count)
    for start in range(0, count, rows):
        m = min(rows, count - start)
        out[start:start + m] = dist.sample(rng, m * n).reshape(m, n).sum(axis=1)
    return out


def chernoff_tail(dist: DistributionSpec, n: int, t: float) -> float:
    """Upper bound on ``P(S_n >= t) + P(S_n <= -t)`` for ``t > 0``.

    Uses the Chernoff bound on both sides when ``log_mgf`` is usable and never
    returns more than the Chebyshev bound ``n / t^2``.
    """
    from scipy.optimize import minimize_scalar

    if t <= 0:
        return 1.0
    cheb = min(1.0, n / (t * t))
    if n * dist.support_radius <= t:
        return 0.0
    s_hi = min(dist.mgf_radius * (1 - 1e-9), 50.0)
    total = 0.0
    for sign in (1.0, -1.0):
        def expo(s, sign=sign):
            return n * dist.log_mgf(sign * s) - s * t
        res = minimize_scalar(expo, bounds=(1e-12, s_hi), method="bounded",
                              options={"xatol": 1e-10})
        total += math.exp(min(res.fun, 0.0))
    return min(cheb, total, 1.0)
