"""Ground-truth estimators of ``P(S_n in [x, x+delta))``.

Two independent routes: an FFT-based n-fold convolution of a finely binned
copy of ``F``, and plain Monte Carlo.  Both return an :class:`OracleEstimate`
whose half-width is an error certificate of the stated kind.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft

from .dist_zoo import DistributionSpec, chernoff_tail, sample_sum
from .edgeworth import IntervalQuery

DEFAULT_MAX_CELLS = 100_000_000
WINDOW_SIGMAS = 12.0


class MemoryBudgetError(ValueError):
    def __init__(self, cells: int, budget: int, min_h: float):
        self.cells = cells
        self.budget = budget
        self.min_h = min_h
        super().__init__(f"grid needs {cells} cells, budget is {budget}; "
                         f"use h >= {min_h:.3g}")


@dataclass(frozen=True)
class OracleEstimate:
    value: float
    error_kind: str
    error_half_width: float

    def __post_init__(self):
        if self.error_kind not in ("discretization", "confidence", "bracket"):
            raise ValueError(f"unknown error kind {self.error_kind!r}")
        if self.error_half_width < 0:
            raise ValueError("half-width must be non-negative")


@dataclass(frozen=True, eq=False)
class GridPMF:
    """Masses of consecutive cells ``[origin + k h, origin + (k+1) h)``.

    Each cell's mass is treated as spread uniformly over the cell, except the
    atoms listed as ``(location, mass, cell_index)``, which are point masses at
    their true location.  ``deficit`` bounds the mass missing from the grid.
    """

    origin: float
    h: float
    masses: np.ndarray
    deficit: float = 0.0
    atoms: tuple[tuple[float, float, int], ...] = ()
    _cum: list = field(default_factory=list, repr=False)

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def cumulative(self) -> np.ndarray:
        if not self._cum:
            c = np.empty(self.masses.size + 1)
            c[0] = 0.0
            np.cumsum(self.masses, out=c[1:])
            self._cum.append(c)
        return self._cum[0]

    def centers(self) -> np.ndarray:
        return self.origin + (np.arange(self.masses.size) + 0.5) * self.h

    def _cdf_linear(self, t):
        c = self.cumulative()
        u = (np.asarray(t, dtype=float) - self.origin) / self.h
        u = np.clip(u, 0.0, float(self.masses.size))
        i = np.minimum(np.floor(u).astype(np.int64), self.masses.size - 1)
        return c[i] + (u - i) * self.masses[i]

    def interval_mass(self, x, delta):
        """Mass of ``[x, x+delta)``; boundary cells split by overlap length."""
        x = np.asarray(x, dtype=float)
        hi = x + delta
        out = self._cdf_linear(hi) - self._cdf_linear(x)
        for loc, mass, k in self.atoms:
            a = self.origin + k * self.h
            overlap = np.clip(np.minimum(hi, a + self.h) - np.maximum(x, a), 0.0, None)
            out = out - mass * overlap / self.h + mass * ((x <= loc) & (loc < hi))
        return out


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("INTLOC_THREADS", "1")))
    except ValueError:
        return 1


def _cell_range(dist: DistributionSpec, h: float, radius: float) -> tuple[int, int]:
    """Indices ``k`` of the cells ``[(k - 1/2) h, (k + 1/2) h)`` that meet the
    support of ``dist`` inside ``[-radius, radius]``."""
    lo = max(-radius, dist.support[0])
    hi = min(radius, dist.support[1])
    return math.floor(lo / h + 0.5), math.ceil(hi / h - 0.5)


def discretize(dist: DistributionSpec, h: float, radius: float) -> GridPMF:
    """Bin ``dist`` by exact CDF increments on cells centred at multiples of ``h``.

    Cells cover ``[-radius, radius]`` (or the support, if smaller); atoms go
    wholly into their containing cell.
    """
    if not 0 < h <= 1e-2:
        raise ValueError(f"h must lie in (0, 1e-2], got {h}")
    if not radius >= 8:
        raise ValueError(f"radius must be at least 8, got {radius}")
    kmin, kmax = _cell_range(dist, h, radius)
    edges = (np.arange(kmin, kmax + 2) - 0.5) * h
    masses = np.diff(dist.continuous_cdf(edges))
    origin = float(edges[0])
    atoms = []
    for loc, mass in dist.atoms:
        k = int(math.floor((loc - origin) / h))
        if 0 <= k < masses.size:
            masses[k] += mass
            atoms.append((float(loc), float(mass), k))
    masses = np.clip(masses, 0.0, None)
    deficit = max(0.0, 1.0 - float(masses.sum()))
    return GridPMF(origin, h, masses, deficit, tuple(atoms))


def _atom_powers(atoms, n: int, max_terms: int = 4096):
    """n-fold convolution of the atomic part as {(index_sum, loc): mass}."""
    result = {(0, 0.0): 1.0}
    for _ in range(n):
        nxt: dict = {}
        for (k0, l0), m0 in result.items():
            for loc, mass, k in atoms:
                key = (k0 + k, l0 + loc)
                nxt[key] = nxt.get(key, 0.0) + m0 * mass
        if len(nxt) > max_terms:
            nxt = dict(sorted(nxt.items(), key=lambda kv: -kv[1])[:max_terms])
        result = nxt
    return result


def convolve_n(pmf: GridPMF, n: int, window: tuple[float, float] | None = None,
               max_cells: int = DEFAULT_MAX_CELLS) -> GridPMF:
    """n-fold convolution by FFT: transform, pointwise n-th power, inverse.

    With ``window=(lo, hi)`` only cells centred in that range are returned; the
    transform is then cyclic and mass of ``S_n`` outside the window aliases in,
    so the caller must account for it (``interval_prob_fft`` does).
    """
    if n < 1:
        raise ValueError("n must be positive")
    if n == 1 and window is None:
        return pmf
    m = pmf.masses.size
    h = pmf.h
    c0 = n * (pmf.origin + 0.5 * h)          # centre of output cell 0 (full support)
    full_cells = n * (m - 1) + 1
    if window is None:
        j_lo, width = 0, full_cells
    else:
        lo, hi = window
        j_lo = max(0, math.ceil((lo - c0) / h))
        j_hi = min(full_cells - 1, math.floor((hi - c0) / h))
        if j_hi < j_lo:
            raise ValueError("window does not intersect the support of S_n")
        width = j_hi - j_lo + 1
    length = scipy.fft.next_fast_len(max(width, m) if window is not None else full_cells,
                                     real=True)
    if length > max_cells:
        span = (max(width, m) if window is not None else full_cells) * h
        raise MemoryBudgetError(length, max_cells, span / max_cells)

    spec = scipy.fft.rfft(pmf.masses, n=length, workers=_threads())
    np.power(spec, n, out=spec)
    cyc = scipy.fft.irfft(spec, n=length, workers=_threads())
    del spec
    start = j_lo % length
    if start + width <= length:
        out = cyc[start:start + width].copy()
    else:
        out = np.concatenate([cyc[start:], cyc[:width - (length - start)]])
    del cyc
    worst = float(out.min())
    if worst < -1e-10:
        raise ArithmeticError(f"FFT produced negative mass {worst:.3g}; grid too coarse?")
    before = out.sum()
    np.clip(out, 0.0, None, out=out)
    after = out.sum()
    if after > 0:
        out *= before / after

    atoms = []
    if pmf.atoms:
        for (k, loc), mass in _atom_powers(pmf.atoms, n).items():
            j = k - j_lo
            if 0 <= j < width:
                atoms.append((loc, mass, j))
    deficit = min(1.0, n * pmf.deficit)
    return GridPMF(c0 + (j_lo - 0.5) * h, h, out, deficit, tuple(atoms))


def x_radius(dist: DistributionSpec, n: int, cap: float, target: float = 1e-17) -> float:
    """Radius >= 8 (grown geometrically, capped) with ``n * P(|X| > r) <= target``."""
    r = 8.0
    while r < cap and n * chernoff_tail(dist, 1, r) > target:
        r *= 1.25
    return min(max(r, 8.0), max(cap, 8.0))


def window_radius(dist: DistributionSpec, n: int) -> float:
    return min(WINDOW_SIGMAS * math.sqrt(n), n * dist.support_radius)


@lru_cache(maxsize=2)
def sum_pmf(dist: DistributionSpec, n: int, h: float,
            max_cells: int = DEFAULT_MAX_CELLS) -> tuple[GridPMF, float]:
    """Binned law of ``S_n`` on ``+-12 sqrt(n)`` and a bound on the mass outside.

    Results for the two most recent ``(dist, n, h)`` are cached.
    """
    wr = window_radius(dist, n)
    pmf = discretize(dist, h, x_radius(dist, n, cap=max(wr, 8.0)))
    if n == 1:
        out = pmf
        alias = 0.0
    else:
        out = convolve_n(pmf, n, window=(-wr - h, wr + h), max_cells=max_cells)
        alias = chernoff_tail(dist, n, wr - 0.5 * n * h)
    return out, alias


def fft_certificate(value, delta: float, h: float, tail: float):
    return (2.0 * h / delta) * value + tail


# Spectral evaluation of the same cyclic DFT.  For large n the transform of the
# binned law raised to the n-th power is negligible outside a few hundred low
# frequencies, so the inverse transform is summed in closed form over each
# query interval using only those frequencies.  The dropped part is bounded by
# summation by parts: |sum_k m_k z^k| <= TV(m) / |1 - z|.

FULL_FFT_CELLS = 1 << 24
SPECTRAL_CUTOFF = 1e-25
_CHUNK = 1 << 22
_TAYLOR_TERMS = 9           # |lambda * offset| <= 0.05 inside a block


def _mass_chunks(dist: DistributionSpec, h: float, kmin: int, kmax: int):
    for a in range(kmin, kmax + 1, _CHUNK):
        b = min(kmax, a + _CHUNK - 1)
        edges = (np.arange(a, b + 2) - 0.5) * h
        yield a, np.clip(np.diff(dist.continuous_cdf(edges)), 0.0, None)


def _binned_chf(dist, h, kmin, kmax, lam, block):
    """``sum_k m_k exp(i lam k h)`` from per-block Taylor moments."""
    off = (np.arange(block) - 0.5 * (block - 1)) * h
    powers = off[:, None] ** np.arange(_TAYLOR_TERMS)[None, :]
    moments, starts = [], []
    for a, m in _mass_chunks(dist, h, kmin, kmax):
        pad = (-m.size) % block
        if pad:
            m = np.concatenate([m, np.zeros(pad)])
        moments.append(m.reshape(-1, block) @ powers)
        starts.append(a + np.arange(m.size // block) * block)
    mom = np.concatenate(moments)
    centers = (np.concatenate(starts) + 0.5 * (block - 1)) * h
    fact = np.array([math.factorial(p) for p in range(_TAYLOR_TERMS)], dtype=float)
    out = np.empty(lam.size, dtype=complex)
    step = max(1, 2_000_000 // max(1, centers.size))
    for i in range(0, lam.size, step):
        lm = lam[i:i + step]
        coef = (1j * lm[:, None]) ** np.arange(_TAYLOR_TERMS)[None, :] / fact
        phase = np.exp(1j * lm[:, None] * centers[None, :])
        out[i:i + step] = np.einsum("kb,bp,kp->k", phase, mom, coef)
    return out


def _spectral_interval_probs(dist: DistributionSpec, n: int, xs: np.ndarray,
                             delta: float, h: float):
    """Values of the binned-and-convolved law on ``[x, x+delta)`` and a bound on
    everything the evaluation leaves out (binning deficit, aliasing, dropped
    frequencies)."""
    if dist.has_atom:
        raise ValueError("spectral evaluation needs an atom-free law")
    reach = max(abs(float(xs.min())), abs(float(xs.max()) + delta))
    radius = x_radius(dist, n, cap=max(reach + 10.0 * math.sqrt(n), 8.0))
    kmin, kmax = _cell_range(dist, h, radius)

    total, tv, prev = 0.0, 0.0, 0.0
    for _, m in _mass_chunks(dist, h, kmin, kmax):
        total += float(m.sum())
        tv += abs(float(m[0]) - prev) + float(np.abs(np.diff(m)).sum())
        prev = float(m[-1])
    tv += prev
    deficit = max(0.0, 1.0 - total)

    cells = delta / h + 2.0
    s = 0.5 * tv * math.exp((math.log(cells) - math.log(SPECTRAL_CUTOFF)) / n)
    if s >= 1.0:
        raise ValueError(f"n={n} is too small for spectral evaluation at h={h:g}")
    lam_cut = 2.0 * math.asin(s) / h

    circle = 2.0 * reach + 20.0 * math.sqrt(n)
    length = math.ceil(circle / h)
    alias = chernoff_tail(dist, n, length * h - reach - 0.5 * n * h)
    kcut = math.ceil(lam_cut * length * h / (2.0 * math.pi))
    ks = np.arange(1, kcut + 1)
    lam = 2.0 * math.pi * ks / (length * h)
    block = max(1, int(0.1 / (lam_cut * h)))
    phi_n = _binned_chf(dist, h, kmin, kmax, lam, block) ** n

    # cumulative kernel of cells [(j - 1/2) h, (j + 1/2) h) split proportionally
    def ends(t):
        u = t / h + 0.5
        j = np.floor(u)
        return j.astype(np.int64), u - j

    ja, fa = ends(xs)
    jb, fb = ends(xs + delta)
    theta = 2.0 * math.pi / length

    def rot(j):
        # exp(-i lam_k j h) with the phase reduced exactly modulo the circle
        r = np.mod(np.multiply.outer(ks, j), length).astype(float)
        return np.exp(-1j * theta * r)

    ea, eb = rot(ja), rot(jb)
    denom = (2j * np.sin(0.5 * theta * ks) * np.exp(-0.5j * theta * ks))[:, None]
    kern = (ea - eb) / denom + fb * eb - fa * ea
    terms = phi_n[:, None] * kern
    series = (2.0 * terms.real.sum(axis=0)) / length
    values = total**n * delta / (h * length) + series
    # the n-th powers carry relative rounding of about n * eps
    rounding = 4.0 * (n + kcut) * np.finfo(float).eps * (
        delta / (h * length) + 2.0 * np.abs(terms).sum(axis=0) / length)
    return values, n * deficit + alias + SPECTRAL_CUTOFF + rounding


def _full_fft_cells(dist: DistributionSpec, n: int, h: float) -> int:
    wr = window_radius(dist, n)
    kmin, kmax = _cell_range(dist, h, x_radius(dist, n, cap=max(wr, 8.0)))
    return int(2.0 * wr / h) + (kmax - kmin + 1)


def interval_prob_fft_many(dist: DistributionSpec, n: int, xs, delta: float,
                           h: float = 1e-3, max_cells: int = DEFAULT_MAX_CELLS,
                           route: str = "auto"):
    """Values and certificates for many left endpoints at fixed ``n``.

    ``route="full"`` transforms the whole grid; ``route="spectral"`` sums the
    inverse transform in closed form over each interval using only the
    frequencies that matter, which keeps memory proportional to the grid of a
    single summand.  ``"auto"`` picks the full transform while it is small.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if route not in ("auto", "full", "spectral"):
        raise ValueError(f"unknown route {route!r}")
    if route == "auto":
        small = dist.has_atom or n == 1 or _full_fft_cells(dist, n, h) <= FULL_FFT_CELLS
        route = "full" if small else "spectral"
    if route == "full":
        pmf, alias = sum_pmf(dist, n, h, max_cells)
        raw = pmf.interval_mass(xs, delta)
        tail = pmf.deficit + alias
    else:
        raw, tail = _spectral_interval_probs(dist, n, xs, delta, h)
    values = np.clip(raw, 0.0, 1.0)
    return values, fft_certificate(values, delta, h, tail)


def interval_prob_fft(dist: DistributionSpec, q: IntervalQuery, h: float = 1e-3,
                      max_cells: int = DEFAULT_MAX_CELLS) -> OracleEstimate:
    """Discretize-and-convolve estimate with certificate ``(2h/delta) p + tail``.

    ``tail`` collects the binning deficit of ``X`` (times ``n``) and a Chernoff
    bound on the mass of ``S_n`` outside the grid window.
    """
    values, certs = interval_prob_fft_many(dist, q.n, [q.x], q.delta, h, max_cells)
    return OracleEstimate(float(values[0]), "discretization", float(certs[0]))


def mc_half_width(p: float, samples: int) -> float:
    return max(1.96 * math.sqrt(p * (1.0 - p) / samples), 1.96 / (2.0 * samples))


def interval_prob_mc(dist: DistributionSpec, q: IntervalQuery, samples: int = 10**6,
                     seed=0) -> OracleEstimate:
    """Hit fraction of ``samples`` simulated sums with a 95% normal CI."""
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    s = sample_sum(dist, q.n, seed, samples)
    hits = np.count_nonzero((s >= q.x) & (s < q.x + q.delta))
    p = hits / samples
    return OracleEstimate(float(p), "confidence", mc_half_width(p, samples))
