"""Aggregate loss S = Y_1 + ... + Y_X with PTE claim counts X.

Exponential and Erlang(2) severities have closed-form densities; lattice
severities go through the mixed-Poisson (Sundt–Vernic) extension of the
Panjer recursion.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, stats

from .distribution import PteParams, RngStream, pmf, sample
from .errors import DomainError, TruncationBudgetExceeded

logger = logging.getLogger(__name__)

DEFAULT_MAX_TABLE_ROWS = 5000
PMF_SUM_TOL = 1e-12


def _check_rate(rate: float) -> float:
    rate = float(rate)
    if not (math.isfinite(rate) and rate > 0.0):
        raise DomainError("rate", rate, "rate > 0")
    return rate


@dataclass(frozen=True)
class ExponentialSeverity:
    rate: float
    kind: ClassVar[str] = "exp"

    def __post_init__(self) -> None:
        object.__setattr__(self, "rate", _check_rate(self.rate))

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    def cdf(self, y: ArrayLike) -> NDArray[np.float64]:
        return stats.expon.cdf(y, scale=1.0 / self.rate)

    def sum_of(self, counts: NDArray[np.int64], rng: RngStream) -> NDArray[np.float64]:
        # a sum of k exponentials is gamma(k)
        shape = np.maximum(counts, 1)
        draws = rng.generator.gamma(shape, 1.0 / self.rate)
        return np.where(counts > 0, draws, 0.0)


@dataclass(frozen=True)
class Erlang2Severity:
    rate: float
    kind: ClassVar[str] = "erlang2"

    def __post_init__(self) -> None:
        object.__setattr__(self, "rate", _check_rate(self.rate))

    @property
    def mean(self) -> float:
        return 2.0 / self.rate

    def cdf(self, y: ArrayLike) -> NDArray[np.float64]:
        return stats.gamma.cdf(y, 2.0, scale=1.0 / self.rate)

    def sum_of(self, counts: NDArray[np.int64], rng: RngStream) -> NDArray[np.float64]:
        shape = np.maximum(2 * counts, 1)
        draws = rng.generator.gamma(shape, 1.0 / self.rate)
        return np.where(counts > 0, draws, 0.0)


@dataclass(frozen=True, eq=False)
class DiscreteSeverity:
    """Claim sizes on the lattice 1..M; ``probs[y]`` is h(y) and h(0) = 0."""

    probs: NDArray[np.float64]
    kind: ClassVar[str] = "discrete"

    def __post_init__(self) -> None:
        h = np.array(self.probs, dtype=np.float64)
        if h.ndim != 1 or h.size < 2:
            raise ValueError("severity pmf needs at least the cells 0 and 1")
        if not np.all(np.isfinite(h)) or np.any(h < 0.0):
            raise DomainError("h", "pmf", "finite non-negative probabilities")
        if h[0] != 0.0:
            raise DomainError("h(0)", float(h[0]), "claim sizes start at 1")
        total = math.fsum(h)
        if abs(total - 1.0) > PMF_SUM_TOL:
            raise DomainError("sum h", total, f"1 within {PMF_SUM_TOL:g}")
        last = int(np.flatnonzero(h)[-1])
        h = h[: last + 1]
        h.setflags(write=False)
        object.__setattr__(self, "probs", h)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]]) -> DiscreteSeverity:
        items = [(int(y), float(p)) for y, p in pairs]
        if not items:
            raise ValueError("severity pmf is empty")
        if min(y for y, _ in items) < 1:
            raise DomainError("claim size", min(y for y, _ in items), "y >= 1")
        h = np.zeros(max(y for y, _ in items) + 1)
        for y, p in items:
            h[y] += p
        return cls(h)

    @property
    def max_value(self) -> int:
        return self.probs.size - 1

    @property
    def mean(self) -> float:
        return float(np.dot(np.arange(self.probs.size), self.probs))

    def sum_of(self, counts: NDArray[np.int64], rng: RngStream) -> NDArray[np.float64]:
        draws = rng.generator.choice(self.probs.size, size=int(counts.sum()), p=self.probs)
        owner = np.repeat(np.arange(counts.size), counts)
        return np.bincount(owner, weights=draws, minlength=counts.size)


SeverityModel = ExponentialSeverity | Erlang2Severity | DiscreteSeverity
ContinuousSeverity = ExponentialSeverity | Erlang2Severity


@dataclass(frozen=True)
class CompoundDistribution:
    frequency: PteParams
    severity: SeverityModel

    @property
    def atom0(self) -> float:
        return float(pmf(self.frequency, 0))

    @property
    def mean(self) -> float:
        return compound_mean(self)

    def density(self, y: ArrayLike) -> float | NDArray[np.float64]:
        if isinstance(self.severity, ExponentialSeverity):
            return compound_density_exp(self.frequency, self.severity.rate, y)
        if isinstance(self.severity, Erlang2Severity):
            return compound_density_erlang2(self.frequency, self.severity.rate, y)
        raise TypeError("a lattice severity has a pmf, not a density")


def _positive_grid(y: ArrayLike) -> NDArray[np.float64]:
    ys = np.asarray(y, dtype=np.float64)
    if np.any(~np.isfinite(ys)) or np.any(ys < 0.0):
        raise ValueError("aggregate loss must be finite and >= 0")
    return ys


def _wrap(out: NDArray[np.float64], y: ArrayLike) -> float | NDArray[np.float64]:
    return float(out) if np.ndim(y) == 0 else out


def compound_density_exp(
    freq: PteParams, lam: float, y: ArrayLike
) -> float | NDArray[np.float64]:
    """Density of the continuous part of S for Exponential(λ) claims.

    At y = 0 the right limit is returned; the atom P(S=0) is separate.
    """
    lam = _check_rate(lam)
    ys = _positive_grid(y)
    a, t = freq.alpha, freq.theta
    out = t * (
        (1.0 - a) * lam * np.exp(-t * lam * ys / (1.0 + t)) / (1.0 + t) ** 2
        + 2.0 * a * lam * np.exp(-2.0 * t * lam * ys / (1.0 + 2.0 * t)) / (1.0 + 2.0 * t) ** 2
    )
    return _wrap(out, y)


def _damped_sinh(lam: float, ys: NDArray[np.float64], s: float) -> NDArray[np.float64]:
    # e^{-λy} sinh(λys) without forming sinh
    return -0.5 * np.exp(-lam * ys * (1.0 - s)) * np.expm1(-2.0 * lam * ys * s)


def compound_density_erlang2(
    freq: PteParams, lam: float, y: ArrayLike
) -> float | NDArray[np.float64]:
    """Density of the continuous part of S for Erlang(2, λ) claims."""
    lam = _check_rate(lam)
    ys = _positive_grid(y)
    a, t = freq.alpha, freq.theta
    s1 = 1.0 / math.sqrt(1.0 + t)
    s2 = 1.0 / math.sqrt(1.0 + 2.0 * t)
    out = lam * t * (
        (1.0 - a) * _damped_sinh(lam, ys, s1) * s1**3
        + 2.0 * a * _damped_sinh(lam, ys, s2) * s2**3
    )
    return _wrap(out, y)


def compound_pmf_discrete(
    freq: PteParams,
    h: DiscreteSeverity,
    s_max: int,
    *,
    max_rows: int = DEFAULT_MAX_TABLE_ROWS,
) -> NDArray[np.float64]:
    """P(S = s) for s = 0..s_max by the mixed-Poisson Panjer recursion.

    Column y of the recursion holds g_i(y) = E[λ^i f_S(y | λ)] / i! for
    i + y <= s_max:

        g_i(0) = p(i)
        g_i(y) = ((i+1)/y) Σ_{x=1}^{min(y,M)} x h(x) g_{i+1}(y−x)

    and the answer is g_0(y).  Column y reads only the M columns before it,
    so a ring of M + 1 columns is kept: memory is (M + 1)·(s_max + 1)
    floats rather than the full square.
    """
    if s_max < 0:
        raise ValueError(f"s_max must be >= 0, got {s_max}")
    rows = s_max + 1
    if rows > max_rows:
        raise TruncationBudgetExceeded(rows, max_rows)

    # claim sizes beyond s_max never contribute
    m = min(h.max_value, s_max)
    hx = np.arange(m + 1) * h.probs[: m + 1]
    ring = np.zeros((m + 1, rows))
    ring[0] = pmf(freq, np.arange(rows))
    out = np.empty(rows)
    out[0] = ring[0, 0]
    for y in range(1, rows):
        xs = np.arange(1, min(y, m) + 1)
        n_i = rows - y
        # g_{i+1}(y−x) for i = 0..n_i−1
        block = ring[(y - xs) % (m + 1), 1 : n_i + 1]
        col = ring[y % (m + 1)]
        col[n_i:] = 0.0
        col[:n_i] = np.arange(1, n_i + 1) / y * (hx[xs] @ block)
        out[y] = col[0]
    logger.debug("Compound recursion used a %d x %d ring", m + 1, rows)
    return out


def compound_mean(dist: CompoundDistribution) -> float:
    return dist.frequency.mean * dist.severity.mean


def compound_cdf(dist: CompoundDistribution, y: float) -> float:
    """P(S <= y)."""
    if y < 0.0:
        return 0.0
    if isinstance(dist.severity, DiscreteSeverity):
        masses = compound_pmf_discrete(dist.frequency, dist.severity, int(math.floor(y)))
        return math.fsum(masses)
    mass, _ = integrate.quad(lambda s: dist.density(s), 0.0, y, limit=200)
    return min(1.0, dist.atom0 + mass)


def stop_loss_premium(dist: CompoundDistribution, d: float) -> float:
    """E[(S − d)+] for retention d >= 0."""
    if not (math.isfinite(d) and d >= 0.0):
        raise ValueError(f"retention must be finite and >= 0, got {d}")
    if isinstance(dist.severity, DiscreteSeverity):
        # E[min(S, d)] = Σ_{s<floor d} P(S>s) + frac(d)·P(S>floor d)
        whole = int(math.floor(d))
        masses = compound_pmf_discrete(dist.frequency, dist.severity, whole)
        tail = 1.0 - np.cumsum(masses)
        limited = math.fsum(tail[:whole]) + (d - whole) * tail[whole]
        return max(0.0, compound_mean(dist) - limited)
    value, _ = integrate.quad(lambda s: (s - d) * dist.density(s), d, np.inf, limit=200)
    return value


def discretize(
    freq: PteParams, severity: ContinuousSeverity, width: float, n_cells: int
) -> tuple[PteParams, DiscreteSeverity]:
    """Round a continuous severity onto the lattice width·{1..n_cells}.

    Cell k receives the mass of ((k−½)w, (k+½)w]; the last cell also takes
    the tail.  Mass rounded to 0 is folded into the claim count by thinning,
    which for a PTE count rescales θ to θ/(1 − h0).
    """
    if not (width > 0.0 and math.isfinite(width)):
        raise ValueError(f"lattice width must be positive, got {width}")
    if n_cells < 1:
        raise ValueError(f"n_cells must be >= 1, got {n_cells}")
    edges = (np.arange(n_cells + 1) + 0.5) * width
    cdf = severity.cdf(edges)
    h0 = float(cdf[0])
    masses = np.empty(n_cells + 1)
    masses[0] = 0.0
    masses[1:] = np.diff(cdf)
    masses[-1] += 1.0 - cdf[-1]
    kept = 1.0 - h0
    if kept <= 0.0:
        raise ValueError(f"lattice width {width} rounds every claim to 0")
    thinned = PteParams(freq.alpha, freq.theta / kept)
    return thinned, DiscreteSeverity(masses / math.fsum(masses))


def simulate_aggregate(
    freq: PteParams, severity: SeverityModel, n: int, rng: RngStream
) -> NDArray[np.float64]:
    if n < 0:
        raise ValueError(f"sample size must be >= 0, got {n}")
    if n == 0:
        return np.empty(0, dtype=np.float64)
    counts = sample(freq, n, rng)
    return severity.sum_of(counts, rng)
