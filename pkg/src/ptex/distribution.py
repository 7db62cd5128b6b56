"""Poisson–Transmuted-Exponential (PTE) count law.

X | λ ~ Poisson(λ) with λ drawn from the transmuted exponential density
(1−α)θe^{−θλ} + 2αθe^{−2θλ}.  Integrating λ out leaves a two-component
geometric mixture, so every quantity here has a closed form:

    p(x) = θ[(1−α)/(1+θ)^{x+1} + 2α/(1+2θ)^{x+1}],   x = 0, 1, ...

with −1 ≤ α ≤ 1 and θ > 0.  α = 0 and α = 1 are single geometric laws.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DomainError, NumericalError

logger = logging.getLogger(__name__)

SERIES_TOL = 1e-12
TIE_TOL = 1e-14
MAX_SERIES_TERMS = 1_000_000


@dataclass(frozen=True)
class PteParams:
    alpha: float
    theta: float

    def __post_init__(self) -> None:
        alpha = float(self.alpha)
        theta = float(self.theta)
        if not (math.isfinite(alpha) and -1.0 <= alpha <= 1.0):
            raise DomainError("alpha", self.alpha, "-1 <= alpha <= 1")
        if not (math.isfinite(theta) and theta > 0.0):
            raise DomainError("theta", self.theta, "theta > 0")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "theta", theta)

    @property
    def alpha_bar(self) -> float:
        return 1.0 - self.alpha

    @property
    def mean(self) -> float:
        return (2.0 - self.alpha) / (2.0 * self.theta)

    @property
    def n_params(self) -> int:
        return 2

    def pmf(self, x: ArrayLike) -> float | NDArray[np.float64]:
        return pmf(self, x)

    def log_pmf(self, x: ArrayLike) -> float | NDArray[np.float64]:
        return log_pmf(self, x)

    def cdf(self, x: ArrayLike) -> float | NDArray[np.float64]:
        return cdf(self, x)

    def survival(self, x: ArrayLike) -> float | NDArray[np.float64]:
        return survival(self, x)


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    variance: float
    skewness: float
    kurtosis: float
    cv: float

    @property
    def excess_kurtosis(self) -> float:
        return self.kurtosis - 3.0


class RngStream:
    """Seeded source of uniforms on [0, 1) and Poisson variates.

    A stream has a single owner.  Parallel work takes one stream per worker
    via ``spawn(index)``, which derives the child from (seed, index).
    """

    def __init__(self, seed: int | None = None) -> None:
        if seed is None:
            seed = int(np.random.SeedSequence().entropy) & (2**64 - 1)
        if not 0 <= int(seed) < 2**64:
            raise DomainError("seed", seed, "0 <= seed < 2**64")
        self.seed = int(seed)
        self._generator = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed))
        )

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def uniform(self, n: int) -> NDArray[np.float64]:
        return self._generator.random(n)

    def poisson(self, lam: ArrayLike) -> NDArray[np.int64]:
        return self._generator.poisson(lam).astype(np.int64)

    def spawn(self, index: int) -> RngStream:
        child_seq = np.random.SeedSequence([self.seed, int(index)])
        child = RngStream.__new__(RngStream)
        child.seed = int(child_seq.generate_state(1, np.uint64)[0])
        child._generator = np.random.Generator(np.random.PCG64(child_seq))
        return child


def _as_counts(x: ArrayLike) -> NDArray[np.float64]:
    arr = np.asarray(x)
    if arr.dtype.kind not in "iuf":
        raise TypeError(f"counts must be numeric, got dtype {arr.dtype}")
    if arr.dtype.kind == "f" and (
        not np.all(np.isfinite(arr)) or np.any(arr != np.floor(arr))
    ):
        raise ValueError("counts must be non-negative integers")
    if np.any(arr < 0):
        raise ValueError("counts must be non-negative integers")
    return arr.astype(np.float64)


def _unwrap(out: NDArray[np.float64], x: ArrayLike) -> float | NDArray[np.float64]:
    if np.ndim(x) == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Mass, distribution and generating functions
# ---------------------------------------------------------------------------


def pmf(params: PteParams, x: ArrayLike) -> float | NDArray[np.float64]:
    xs = _as_counts(x)
    a, t = params.alpha, params.theta
    k = xs + 1.0
    out = t * ((1.0 - a) * np.power(1.0 + t, -k) + 2.0 * a * np.power(1.0 + 2.0 * t, -k))
    return _unwrap(out, x)


def _log_pmf_terms(
    alpha: float, theta: ArrayLike, x: NDArray[np.float64]
) -> NDArray[np.float64]:
    """log p(x) for a scalar alpha and broadcastable theta, x."""
    theta = np.asarray(theta, dtype=np.float64)
    k = x + 1.0
    log_a = np.log1p(theta)
    log_b = np.log1p(2.0 * theta)
    if alpha > 0.0:
        with np.errstate(divide="ignore"):
            return np.log(theta) + np.logaddexp(
                np.log1p(-alpha) - k * log_a, math.log(2.0 * alpha) - k * log_b
            )
    # alpha <= 0: the second branch only subtracts and never outweighs the first
    ratio = np.exp(-k * (log_b - log_a))
    return (
        np.log(theta)
        + math.log1p(-alpha)
        - k * log_a
        + np.log1p(2.0 * alpha / (1.0 - alpha) * ratio)
    )


def log_pmf(params: PteParams, x: ArrayLike) -> float | NDArray[np.float64]:
    xs = _as_counts(x)
    return _unwrap(_log_pmf_terms(params.alpha, params.theta, xs), x)


def pmf_recursive(params: PteParams, x_max: int) -> NDArray[np.float64]:
    """p(0..x_max) from p(0) and the ratio p(x+1)/p(x)."""
    if x_max < 0:
        raise ValueError(f"x_max must be >= 0, got {x_max}")
    a, t = params.alpha, params.theta
    abar = 1.0 - a
    q = (1.0 + t) / (1.0 + 2.0 * t)
    probs = np.empty(x_max + 1)
    probs[0] = t * (1.0 + a + 2.0 * t) / ((1.0 + t) * (1.0 + 2.0 * t))
    q_pow = q  # q^(x+1)
    for x in range(x_max):
        probs[x + 1] = probs[x] * (abar + 2.0 * a * q_pow * q) / (
            (1.0 + t) * (abar + 2.0 * a * q_pow)
        )
        q_pow *= q
    return probs


def survival(params: PteParams, x: ArrayLike) -> float | NDArray[np.float64]:
    """P(X >= x)."""
    xs = _as_counts(x)
    a, t = params.alpha, params.theta
    out = (1.0 - a) * np.power(1.0 + t, -xs) + a * np.power(1.0 + 2.0 * t, -xs)
    return _unwrap(out, x)


def cdf(params: PteParams, x: ArrayLike) -> float | NDArray[np.float64]:
    """P(X <= x)."""
    xs = _as_counts(x)
    out = 1.0 - np.asarray(survival(params, xs + 1.0))
    return _unwrap(out, x)


def hazard(params: PteParams, x: ArrayLike) -> float | NDArray[np.float64]:
    """Discrete hazard p(x) / P(X >= x)."""
    xs = _as_counts(x)
    out = np.asarray(pmf(params, xs)) / np.asarray(survival(params, xs))
    return _unwrap(out, x)


def pgf(params: PteParams, t: ArrayLike) -> float | NDArray[np.float64]:
    ts = np.asarray(t, dtype=np.float64)
    a, th = params.alpha, params.theta
    d1 = 1.0 - ts + th
    d2 = 1.0 - ts + 2.0 * th
    if np.any(d1 == 0.0) or np.any(d2 == 0.0):
        raise DomainError("t", t, "t != 1+theta and t != 1+2*theta")
    out = (th * (1.0 - ts) * (1.0 + a) + 2.0 * th * th) / (d1 * d2)
    return _unwrap(out, t)


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------


def lerch_phi(z: float, s: float, a: float = 0.0, tol: float = SERIES_TOL) -> float:
    """Hurwitz–Lerch transcendent Φ(z, s, a) = Σ_{k≥0} z^k (k+a)^{−s}, 0 ≤ z < 1.

    Summation stops once the geometric bound on the remaining tail drops
    below ``tol``.  For a = 0 the k = 0 term is 0^{−s}, taken as 1 when s = 0.
    """
    if not 0.0 <= z < 1.0:
        raise DomainError("z", z, "0 <= z < 1")
    if a < 0.0 or (a == 0.0 and s > 0.0):
        raise DomainError("a", a, "a > 0, or a = 0 with s <= 0")
    if z == 0.0:
        return 1.0 if (a == 0.0 and s == 0.0) else (a ** -s if a > 0.0 else 0.0)

    log_z = math.log(z)
    terms: list[float] = []
    for k in range(MAX_SERIES_TERMS):
        base = k + a
        if base == 0.0:
            terms.append(1.0 if s == 0.0 else 0.0)
            continue
        term = math.exp(k * log_z - s * math.log(base))
        terms.append(term)
        # ratio of consecutive terms; for s <= 0 it decreases with k, for s > 0 it stays below z
        rho = z * ((base + 1.0) / base) ** (-s) if s <= 0.0 else z
        if rho < 1.0 and term * rho / (1.0 - rho) < tol:
            return math.fsum(terms)
    raise NumericalError(
        f"Lerch series for z={z}, s={s}, a={a} did not reach tolerance {tol} "
        f"within {MAX_SERIES_TERMS} terms"
    )


def raw_moment(params: PteParams, r: int) -> float:
    if r < 1:
        raise ValueError(f"moment order must be >= 1, got {r}")
    a, t = params.alpha, params.theta
    if r == 1:
        return (2.0 - a) / (2.0 * t)
    if r == 2:
        return (4.0 - 3.0 * a + 2.0 * t - a * t) / (2.0 * t**2)
    if r == 3:
        return (
            24.0 + 24.0 * t + 4.0 * t**2 - 21.0 * a - 18.0 * t * a - 2.0 * t**2 * a
        ) / (4.0 * t**3)
    if r == 4:
        return (
            48.0 + 72.0 * t + 28.0 * t**2 + 2.0 * t**3
            - 45.0 * a - 63.0 * t * a - 21.0 * t**2 * a - t**3 * a
        ) / (2.0 * t**4)
    z1 = 1.0 / (1.0 + t)
    z2 = 1.0 / (1.0 + 2.0 * t)
    return (
        t * (1.0 - a) * z1 * lerch_phi(z1, -r)
        + 2.0 * t * a * z2 * lerch_phi(z2, -r)
    )


def moments(params: PteParams) -> MomentSummary:
    a, t = params.alpha, params.theta
    q = 4.0 + 2.0 * t * (2.0 - a) - a * (2.0 + a)
    mean = (2.0 - a) / (2.0 * t)
    variance = q / (4.0 * t * t)
    skewness = (
        2.0
        * (
            8.0 + 4.0 * t * (3.0 + t) - 3.0 * a - 2.0 * t * a * (3.0 + t)
            - 3.0 * a * a * (1.0 + t) - a**3
        )
        / q**1.5
    )
    kurtosis = (
        16.0 * (1.0 + t) * (9.0 + t * (9.0 + t))
        - 8.0 * (1.0 + t) * (9.0 + t * (12.0 + t)) * a
        - 8.0 * (6.0 + t * (9.0 + 2.0 * t)) * a * a
        - 12.0 * (1.0 + t) * a**3
        - 3.0 * a**4
    ) / (q * q)
    return MomentSummary(
        mean=mean,
        variance=variance,
        skewness=skewness,
        kurtosis=kurtosis,
        cv=math.sqrt(q) / (2.0 - a),
    )


def variance_upper_bound(params: PteParams) -> float:
    """p(1)/p(0), the variance bound of the infinitely divisible regime."""
    p = pmf(params, np.array([0, 1]))
    return float(p[1] / p[0])  # type: ignore[index]


def log_concavity_gap(params: PteParams, x: ArrayLike) -> float | NDArray[np.float64]:
    """p(x)^2 − p(x−1)p(x+1) for x >= 1."""
    xs = _as_counts(x)
    if np.any(xs < 1):
        raise ValueError("log-concavity gap needs x >= 1")
    p = np.asarray(pmf(params, xs))
    out = p * p - np.asarray(pmf(params, xs - 1.0)) * np.asarray(pmf(params, xs + 1.0))
    return _unwrap(out, x)


def mode(params: PteParams) -> tuple[int, ...]:
    """Mode(s) located by walking the ratio recursion until it turns down."""
    a, t = params.alpha, params.theta
    abar = 1.0 - a
    q = (1.0 + t) / (1.0 + 2.0 * t)
    p = t * (1.0 + a + 2.0 * t) / ((1.0 + t) * (1.0 + 2.0 * t))
    q_pow = q
    x = 0
    while True:
        nxt = p * (abar + 2.0 * a * q_pow * q) / ((1.0 + t) * (abar + 2.0 * a * q_pow))
        if abs(nxt - p) <= TIE_TOL:
            return (x, x + 1)
        if nxt < p:
            return (x,)
        p = nxt
        q_pow *= q
        x += 1


# ---------------------------------------------------------------------------
# Mixing density and its Taylor-series view of the pmf
# ---------------------------------------------------------------------------


def _check_rate(lam: ArrayLike) -> NDArray[np.float64]:
    arr = np.asarray(lam, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0):
        raise ValueError("mixing rate must be finite and >= 0")
    return arr


def ted_pdf(params: PteParams, lam: ArrayLike) -> float | NDArray[np.float64]:
    ls = _check_rate(lam)
    a, t = params.alpha, params.theta
    out = (1.0 - a) * t * np.exp(-t * ls) + 2.0 * a * t * np.exp(-2.0 * t * ls)
    return _unwrap(out, lam)


def ted_cdf(params: PteParams, lam: ArrayLike) -> float | NDArray[np.float64]:
    ls = _check_rate(lam)
    a, t = params.alpha, params.theta
    out = -(1.0 - a) * np.expm1(-t * ls) - a * np.expm1(-2.0 * t * ls)
    return _unwrap(out, lam)


def _ted_quantile(alpha: float, theta: ArrayLike, u: ArrayLike) -> NDArray[np.float64]:
    u = np.asarray(u, dtype=np.float64)
    root = np.sqrt(1.0 + 2.0 * alpha - 4.0 * u * alpha + alpha * alpha)
    return np.log((1.0 - alpha + root) / (2.0 * (1.0 - u))) / np.asarray(theta)


def ted_quantile(params: PteParams, u: ArrayLike) -> float | NDArray[np.float64]:
    us = np.asarray(u, dtype=np.float64)
    if np.any(~(us >= 0.0)) or np.any(us >= 1.0):
        raise DomainError("u", u, "0 <= u < 1")
    return _unwrap(_ted_quantile(params.alpha, params.theta, us), u)


def _gamma_central_moments(shape: float, order: int) -> list[float]:
    """Central moments μ_0..μ_order of a gamma(shape, scale=1) variable."""
    cumulants = [0.0] + [math.factorial(n - 1) * shape for n in range(1, order + 1)]
    mu = [1.0, 0.0]
    for n in range(2, order + 1):
        mu.append(
            sum(math.comb(n - 1, j) * cumulants[n - j] * mu[j] for j in range(n - 1))
        )
    return mu[: order + 1]


def _xg_derivative(params: PteParams, x: float, i: int) -> float:
    """i-th derivative of f(x) = x·g(x), g the mixing density."""
    a, t = params.alpha, params.theta
    return (1.0 - a) * t * (-t) ** (i - 1) * math.exp(-t * x) * (i - t * x) + (
        2.0 * a * t * (-2.0 * t) ** (i - 1) * math.exp(-2.0 * t * x) * (i - 2.0 * t * x)
    )


def taylor_pmf(params: PteParams, k: int, n_terms: int) -> float:
    """Approximate p(k) by expanding x·g(x) about k.

    p(k) = g(k) + (1/k) Σ_{i=2}^{n_terms+1} μ_i f^{(i)}(k)/i!, with μ_i the
    central moments of gamma(shape k, scale 1).  The series is asymptotic,
    not convergent; n_terms = 0 keeps the leading term only.
    """
    if k < 1:
        raise ValueError(f"expansion point must be >= 1, got {k}")
    if n_terms < 0:
        raise ValueError(f"n_terms must be >= 0, got {n_terms}")
    leading = float(ted_pdf(params, float(k)))
    if n_terms == 0:
        return leading
    mu = _gamma_central_moments(float(k), n_terms + 1)
    correction = math.fsum(
        mu[i] * _xg_derivative(params, float(k), i) / math.factorial(i)
        for i in range(2, n_terms + 2)
    )
    return leading + correction / k


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def _draw(alpha: float, theta: ArrayLike, n: int, rng: RngStream) -> NDArray[np.int64]:
    u = rng.uniform(n)
    lam = _ted_quantile(alpha, theta, u)
    return rng.poisson(lam)


def sample(params: PteParams, n: int, rng: RngStream) -> NDArray[np.int64]:
    """Draw n variates: u ~ U[0,1) → λ = TED quantile(u) → Poisson(λ)."""
    if n < 0:
        raise ValueError(f"sample size must be >= 0, got {n}")
    if n == 0:
        return np.empty(0, dtype=np.int64)
    return _draw(params.alpha, params.theta, n, rng)

