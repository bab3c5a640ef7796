"""Error-versus-n sweeps, log-log rate fits and the small sanity studies.

Errors are measured on the per-unit-width scale ``|oracle - approx| / delta``,
so a fitted slope estimates the decay exponent of that quantity directly.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dist_zoo import builtin
from .edgeworth import IntervalQuery, refined_approx, refined_terms
from .inversion import InversionConfig, sandwich_bracket
from .oracles import interval_prob_fft_many, interval_prob_mc

FLAG_RATIO = 0.1
MAX_FLAGGED = 0.2
FFT_H_MAX = 1e-3
FFT_H_SCALE = 0.01


class SweepConfigError(ValueError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(message)


class ResolutionAdvisory(RuntimeError):
    """Too many sweep points have an oracle certificate comparable to the error."""


@dataclass(frozen=True)
class SweepConfig:
    dist: str
    n_list: tuple[int, ...]
    delta: float
    m: float = 6.0
    s: float = 0.05
    oracle: str = "fft"
    approx: str = "refined"
    h: float | None = None
    samples: int = 10**6
    seed: int = 0

    def __post_init__(self):
        n_list = tuple(int(n) for n in self.n_list)
        object.__setattr__(self, "n_list", n_list)
        if not n_list or any(n < 1 for n in n_list):
            raise SweepConfigError("n_list", "n_list must hold positive integers")
        if any(b <= a for a, b in zip(n_list, n_list[1:])):
            raise SweepConfigError("n_list", "n_list must be strictly increasing")
        if not self.delta > 0:
            raise SweepConfigError("delta", "delta must be positive")
        if not self.m >= 4:
            raise SweepConfigError("m", "grid range multiplier m must be at least 4")
        if not self.s > 0:
            raise SweepConfigError("s", "grid step s must be positive")
        if self.oracle not in ("fft", "mc", "inversion"):
            raise SweepConfigError("oracle", f"unknown oracle {self.oracle!r}")
        if self.approx not in ("stone", "refined"):
            raise SweepConfigError("approx", f"unknown approximation {self.approx!r}")
        if self.h is not None and not 0 < self.h <= 1e-2:
            raise SweepConfigError("h", "h must lie in (0, 1e-2]")
        if self.samples < 1000:
            raise SweepConfigError("samples", "need at least 1000 samples")
        try:
            builtin(self.dist)
        except ValueError as exc:
            raise SweepConfigError("dist", str(exc)) from None

    def fft_h(self, n: int) -> float:
        """Grid step for the FFT oracle.

        The certificate ``(2h/delta) p`` is about ``2h/sqrt(n)`` per unit
        width while the refined error decays like ``n^-1.5``, so ``h`` must
        shrink like ``delta / n`` to keep certified points in the majority.
        """
        return self.h if self.h is not None else min(FFT_H_MAX, FFT_H_SCALE * self.delta / n)

    def x_grid(self, n: int) -> np.ndarray:
        k = math.floor(self.m / self.s + 1e-9)
        return np.arange(-k, k + 1) * self.s * math.sqrt(n)


@dataclass(frozen=True)
class SweepPoint:
    x: float
    approx_value: float
    oracle_value: float
    oracle_half_width: float
    flagged: bool

    @property
    def abs_err(self) -> float:
        return abs(self.approx_value - self.oracle_value)


@dataclass(frozen=True)
class SupError:
    n: int
    delta: float
    sup: float
    x_at_sup: float
    flagged_fraction: float
    points: tuple[SweepPoint, ...]

    @property
    def argmax_point(self) -> SweepPoint:
        return max(self.points, key=lambda p: (p.abs_err, -p.x))


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class AtomFloorReport:
    floor: float
    formula_value: float
    ratio: float


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("INTLOC_THREADS", "1")))
    except ValueError:
        return 1


def _approx_values(cfg: SweepConfig, n: int, xs: np.ndarray) -> np.ndarray:
    mu3 = builtin(cfg.dist).mu3
    stone, skew, dterm = refined_terms(mu3, n, xs, cfg.delta)
    return stone if cfg.approx == "stone" else stone + skew + dterm


def _oracle_values(cfg: SweepConfig, n: int, xs: np.ndarray):
    dist = builtin(cfg.dist)
    if cfg.oracle == "fft":
        return interval_prob_fft_many(dist, n, xs, cfg.delta, h=cfg.fft_h(n))
    vals = np.empty(xs.size)
    hws = np.empty(xs.size)
    for i, x in enumerate(xs):
        q = IntervalQuery(n, float(x), cfg.delta)
        if cfg.oracle == "mc":
            est = interval_prob_mc(dist, q, cfg.samples, seed=(cfg.seed, n, i))
            vals[i], hws[i] = est.value, est.error_half_width
        else:
            br = sandwich_bracket(dist, q, InversionConfig())
            vals[i] = 0.5 * (br.lower + br.upper)
            hws[i] = 0.5 * br.width + br.tol
    return vals, hws


def sup_error(cfg: SweepConfig, n: int) -> SupError:
    """Largest per-unit-width error over the x grid ``k s sqrt(n)``, ``|x| <= m sqrt(n)``."""
    if n not in cfg.n_list:
        raise ValueError(f"n={n} is not in the sweep's n_list")
    xs = cfg.x_grid(n)
    approx = _approx_values(cfg, n, xs)
    oracle, hw = _oracle_values(cfg, n, xs)
    err = np.abs(oracle - approx)
    flagged = hw > FLAG_RATIO * err
    frac = float(flagged.mean())
    if frac > MAX_FLAGGED:
        hint = (f"halve h (now {cfg.fft_h(n):.3g})" if cfg.oracle == "fft"
                else "raise samples" if cfg.oracle == "mc" else "tighten the inversion")
        raise ResolutionAdvisory(
            f"{cfg.dist} n={n} delta={cfg.delta}: {frac:.0%} of grid points have an oracle "
            f"certificate above {FLAG_RATIO:.0%} of the observed error; {hint}")
    points = tuple(SweepPoint(float(x), float(a), float(o), float(w), bool(f))
                   for x, a, o, w, f in zip(xs, approx, oracle, hw, flagged))
    i = int(np.argmax(err))
    return SupError(n, cfg.delta, float(err[i] / cfg.delta), float(xs[i]), frac, points)


def sweep(cfg: SweepConfig) -> list[SupError]:
    """Run :func:`sup_error` for every n; results are ordered by n.

    ``INTLOC_THREADS`` caps the number of n values processed concurrently.
    """
    workers = min(worker_count(), len(cfg.n_list))
    if workers == 1:
        results = [sup_error(cfg, n) for n in cfg.n_list]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda n: sup_error(cfg, n), cfg.n_list))
    return sorted(results, key=lambda r: r.n)


def rate_fit(points) -> RateFit:
    """Least-squares line through ``(log n, log err)``."""
    pts = [(float(n), float(e)) for n, e in points if e > 0]
    if len(pts) < 3:
        raise ValueError("rate fit needs at least 3 points with positive error")
    ln = np.log([p[0] for p in pts])
    le = np.log([p[1] for p in pts])
    res = stats.linregress(ln, le)
    return RateFit(float(res.slope), float(res.intercept), float(res.rvalue**2))


def atom_floor_demo(n: int, delta: float) -> AtomFloorReport:
    """Compare ``P(S_n = 0) >= 2^-n`` for ``atomic_mix`` with the expansion at x = 0."""
    floor = 2.0**-n
    if not 0 < delta < floor:
        raise ValueError(f"delta must lie in (0, 2^-{n}) = (0, {floor:.6g})")
    formula = refined_approx(builtin("atomic_mix"), IntervalQuery(n, 0.0, delta)).total
    return AtomFloorReport(floor, formula, floor / formula)


def mass_check(dist, n: int, delta: float) -> float:
    """``|sum_k total(n, k delta, delta) - 1|`` over ``|k delta| <= 10 sqrt(n)``."""
    if isinstance(dist, str):
        dist = builtin(dist)
    k = math.floor(10.0 * math.sqrt(n) / delta + 1e-9)
    xs = np.arange(-k, k + 1) * delta
    stone, skew, dterm = refined_terms(dist.mu3, n, xs, delta)
    return abs(float(np.sum(stone + skew + dterm)) - 1.0)
