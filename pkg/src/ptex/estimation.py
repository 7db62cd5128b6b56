"""Parameter estimation and goodness of fit for count data."""

from __future__ import annotations

import hashlib
import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass
from typing import Literal, Protocol

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize, special, stats

from .distribution import PteParams, _log_pmf_terms, pmf, raw_moment
from .errors import (
    DomainError,
    EmptyCell,
    InfeasibleMoments,
    InfeasibleStatistics,
    SingularInformation,
)

logger = logging.getLogger(__name__)

FitMethod = Literal["moments", "proportion_moment", "mle"]

DEFAULT_MAX_ITER = 500
DEFAULT_GTOL = 1e-8
NEWTON_STEPS = 20
BOUNDARY_ALPHA = 1.0 - 1e-6
BOUNDARY_THETA = (1e-8, 1e6)
_ROOT_SLACK = 1e-12


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CountDataset:
    """Observed (value, frequency) pairs, values distinct and ascending."""

    values: NDArray[np.int64]
    frequencies: NDArray[np.int64]
    name: str = ""

    def __post_init__(self) -> None:
        values = np.asarray(self.values)
        freqs = np.asarray(self.frequencies)
        if values.ndim != 1 or freqs.shape != values.shape:
            raise ValueError("values and frequencies must be 1-D and the same length")
        for label, arr in (("values", values), ("frequencies", freqs)):
            if arr.size and (arr.dtype.kind not in "iuf" or np.any(arr != np.floor(arr))):
                raise ValueError(f"{label} must be integers")
            if np.any(arr < 0):
                raise ValueError(f"{label} must be non-negative")
        values = values.astype(np.int64)
        freqs = freqs.astype(np.int64)
        if np.any(np.diff(values) <= 0):
            raise ValueError("values must be distinct and sorted ascending")
        if freqs.sum() < 1:
            raise ValueError("dataset must contain at least one observation")
        values.setflags(write=False)
        freqs.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "frequencies", freqs)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]], name: str = "") -> CountDataset:
        merged: dict[int, int] = {}
        for value, freq in pairs:
            merged[int(value)] = merged.get(int(value), 0) + int(freq)
        keys = sorted(merged)
        return cls(
            np.array(keys, dtype=np.int64),
            np.array([merged[k] for k in keys], dtype=np.int64),
            name=name,
        )

    @classmethod
    def from_counts(cls, counts: ArrayLike, name: str = "") -> CountDataset:
        arr = np.asarray(counts)
        if arr.size == 0:
            raise ValueError("dataset must contain at least one observation")
        values, freqs = np.unique(arr, return_counts=True)
        return cls(values, freqs, name=name)

    @property
    def n(self) -> int:
        return int(self.frequencies.sum())

    @property
    def m1(self) -> float:
        return float(np.dot(self.values, self.frequencies)) / self.n

    @property
    def m2(self) -> float:
        v = self.values.astype(np.float64)
        return float(np.dot(v * v, self.frequencies)) / self.n

    @property
    def mean(self) -> float:
        return self.m1

    @property
    def variance(self) -> float:
        return self.m2 - self.m1**2

    @property
    def p0(self) -> float:
        zero = self.frequencies[self.values == 0]
        return float(zero.sum()) / self.n

    @property
    def n_distinct(self) -> int:
        return int(np.count_nonzero(self.frequencies))

    @property
    def max_value(self) -> int:
        return int(self.values[self.frequencies > 0].max())

    def pairs(self) -> list[tuple[int, int]]:
        return [(int(v), int(f)) for v, f in zip(self.values, self.frequencies)]

    def expand(self) -> NDArray[np.int64]:
        return np.repeat(self.values, self.frequencies)

    @property
    def digest(self) -> str:
        """SHA-256 over the canonical "value,frequency" lines (zero rows dropped)."""
        canon = "\n".join(f"{v},{f}" for v, f in self.pairs() if f > 0)
        return hashlib.sha256(canon.encode("ascii")).hexdigest()


@dataclass(frozen=True, eq=False)
class FitResult:
    params: PteParams
    method: FitMethod
    loglik: float
    n: int
    se: tuple[float, float] | None = None
    cov: NDArray[np.float64] | None = None
    converged: bool = True
    iterations: int = 0
    at_boundary: bool = False
    message: str = ""

    @property
    def aic(self) -> float:
        return aic(self.loglik, self.params.n_params)


def aic(loglik: float, k: int) -> float:
    if k < 1:
        raise ValueError(f"parameter count must be >= 1, got {k}")
    return -2.0 * loglik + 2.0 * k


# ---------------------------------------------------------------------------
# Closed-form estimators
# ---------------------------------------------------------------------------


def _in_domain(alpha: float, theta: float) -> PteParams | None:
    if not (math.isfinite(alpha) and math.isfinite(theta)) or theta <= 0.0:
        return None
    if abs(alpha) > 1.0 + _ROOT_SLACK:
        return None
    return PteParams(min(1.0, max(-1.0, alpha)), theta)


def _moment_roots(m1: float, m2: float) -> list[PteParams]:
    if m1 == m2:
        raise InfeasibleMoments(m1, m2, "m1 equals m2")
    disc = 4.0 * m1 + 9.0 * m1 * m1 - 4.0 * m2
    if disc < 0.0:
        raise InfeasibleMoments(m1, m2, f"discriminant {disc:.6g} is negative")
    root = math.sqrt(disc)
    roots = []
    # printed root first; the second root in product form avoids cancellation
    for theta in (
        (3.0 * m1 + root) / (2.0 * (m2 - m1)),
        2.0 / (3.0 * m1 + root),
    ):
        params = _in_domain(2.0 - 2.0 * theta * m1, theta)
        if params is not None:
            roots.append(params)
    if not roots:
        raise InfeasibleMoments(m1, m2, "solution leaves the parameter domain")
    return roots


def estimate_from_moments(m1: float, m2: float, p0: float | None = None) -> PteParams:
    """Solve the first two moment equations.

    The equations have two roots.  When both lie in the domain, the one
    whose p(0) is closer to ``p0`` wins; without ``p0`` the printed root does.
    """
    roots = _moment_roots(m1, m2)
    if len(roots) == 1 or p0 is None:
        return roots[0]
    printed, other = roots
    if abs(float(pmf(other, 0)) - p0) < abs(float(pmf(printed, 0)) - p0) - _ROOT_SLACK:
        return other
    return printed


def _proportion_roots(p0: float, xbar: float) -> list[PteParams]:
    if not 0.0 < p0 < 1.0:
        raise InfeasibleStatistics(p0, xbar, "zero proportion must lie in (0, 1)")
    if xbar <= 0.0:
        raise InfeasibleStatistics(p0, xbar, "mean must be positive")
    denom = xbar + p0 - 1.0
    if abs(denom) < 1e-15:
        raise InfeasibleStatistics(p0, xbar, "mean + p0 equals 1")
    radicand = 9.0 - 10.0 * p0 - 8.0 * xbar * p0 + p0 * p0
    if radicand < 0.0:
        raise InfeasibleStatistics(p0, xbar, f"radicand {radicand:.6g} is negative")
    root = math.sqrt(radicand)
    roots = []
    for theta in (
        (3.0 - 3.0 * p0 + root) / (4.0 * denom),
        2.0 * p0 / (3.0 - 3.0 * p0 + root),
    ):
        params = _in_domain(2.0 - 2.0 * theta * xbar, theta)
        if params is not None:
            roots.append(params)
    if not roots:
        raise InfeasibleStatistics(p0, xbar, "solution leaves the parameter domain")
    return roots


def estimate_from_proportion(
    p0: float, xbar: float, m2: float | None = None
) -> PteParams:
    """Match the zero proportion and the mean; ``m2`` breaks a two-root tie."""
    roots = _proportion_roots(p0, xbar)
    if len(roots) == 1 or m2 is None:
        return roots[0]
    printed, other = roots
    if abs(raw_moment(other, 2) - m2) < abs(raw_moment(printed, 2) - m2) - _ROOT_SLACK:
        return other
    return printed


def fit_moments(data: CountDataset) -> FitResult:
    params = estimate_from_moments(data.m1, data.m2, data.p0)
    return FitResult(params, "moments", loglik(params, data), data.n)


def fit_proportion_moment(data: CountDataset) -> FitResult:
    params = estimate_from_proportion(data.p0, data.m1, data.m2)
    return FitResult(params, "proportion_moment", loglik(params, data), data.n)


def theta_known_alpha(data: CountDataset, alpha: float) -> float:
    """θ̃ = (2−α)/(2x̄) when α is known."""
    if data.m1 <= 0.0:
        raise InfeasibleStatistics(data.p0, data.m1, "mean must be positive")
    return (2.0 - alpha) / (2.0 * data.m1)


# ---------------------------------------------------------------------------
# Likelihood and its derivatives
# ---------------------------------------------------------------------------


def loglik(params: PteParams, data: CountDataset) -> float:
    terms = _log_pmf_terms(params.alpha, params.theta, data.values.astype(np.float64))
    return float(np.dot(data.frequencies, terms))


def _score_terms(
    alpha: float, theta: ArrayLike, x: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    theta = np.asarray(theta, dtype=np.float64)
    k = x + 1.0
    r = np.exp(-k * (np.log1p(2.0 * theta) - np.log1p(theta)))
    d = (1.0 - alpha) + 2.0 * alpha * r
    d_alpha = (2.0 * r - 1.0) / d
    d_theta = 1.0 / theta - k * (
        (1.0 - alpha) / (1.0 + theta) + 4.0 * alpha * r / (1.0 + 2.0 * theta)
    ) / d
    return d_alpha, d_theta


def score(params: PteParams, data: CountDataset) -> tuple[float, float]:
    d_alpha, d_theta = _score_terms(
        params.alpha, params.theta, data.values.astype(np.float64)
    )
    f = data.frequencies
    return float(np.dot(f, d_alpha)), float(np.dot(f, d_theta))


def _hessian(params: PteParams, data: CountDataset) -> NDArray[np.float64]:
    a, t = params.alpha, params.theta
    x = data.values.astype(np.float64)
    k = x + 1.0
    c = 1.0 / ((1.0 + t) * (1.0 + 2.0 * t))
    r = np.exp(-k * (math.log1p(2.0 * t) - math.log1p(t)))
    d = (1.0 - a) + 2.0 * a * r
    r1 = -k * r * c
    r2 = k * r * c * c * (k + 3.0 + 4.0 * t)
    h_aa = -((2.0 * r - 1.0) ** 2) / d**2
    h_at = 2.0 * r1 / d**2
    h_tt = -1.0 / t**2 + k / (1.0 + t) ** 2 + 2.0 * a * r2 / d - (2.0 * a * r1 / d) ** 2
    f = data.frequencies
    off = float(np.dot(f, h_at))
    return np.array([[float(np.dot(f, h_aa)), off], [off, float(np.dot(f, h_tt))]])


@dataclass(frozen=True, eq=False)
class ObservedInformation:
    matrix: NDArray[np.float64]
    covariance: NDArray[np.float64]
    se: tuple[float, float]


def observed_information(params: PteParams, data: CountDataset) -> ObservedInformation:
    """Negative Hessian of the log-likelihood and the standard errors it implies."""
    info = -_hessian(params, data)
    try:
        np.linalg.cholesky(info)
    except np.linalg.LinAlgError as e:
        raise SingularInformation(
            f"Observed information at alpha={params.alpha:.6g}, "
            f"theta={params.theta:.6g} is not positive definite"
        ) from e
    cov = np.linalg.inv(info)
    cov = 0.5 * (cov + cov.T)
    se = np.sqrt(np.diag(cov))
    return ObservedInformation(info, cov, (float(se[0]), float(se[1])))


# ---------------------------------------------------------------------------
# Maximum likelihood
# ---------------------------------------------------------------------------


def _to_free(params: PteParams) -> NDArray[np.float64]:
    alpha = min(0.99, max(-0.99, params.alpha))
    return np.array([special.logit((alpha + 1.0) / 2.0), math.log(params.theta)])


def _from_free(z: NDArray[np.float64]) -> PteParams:
    # line searches may probe far out; keep exp() finite
    log_theta = min(max(float(z[1]), -700.0), 700.0)
    return PteParams(2.0 * special.expit(z[0]) - 1.0, math.exp(log_theta))


def _free_gradient(params: PteParams, data: CountDataset) -> NDArray[np.float64]:
    """Gradient of loglik/n with respect to the unconstrained coordinates."""
    g_alpha, g_theta = score(params, data)
    s = (params.alpha + 1.0) / 2.0
    return np.array([g_alpha * 2.0 * s * (1.0 - s), g_theta * params.theta]) / data.n


def _default_start(data: CountDataset) -> PteParams:
    try:
        guess = estimate_from_moments(data.m1, data.m2, data.p0)
        return PteParams(min(0.99, max(-0.99, guess.alpha)), guess.theta)
    except InfeasibleMoments as e:
        logger.debug("Moment start unavailable (%s); using alpha=0, theta=1/m1", e)
        return PteParams(0.0, 1.0 / data.m1 if data.m1 > 0 else 1.0)


def _is_boundary(params: PteParams) -> bool:
    lo, hi = BOUNDARY_THETA
    return abs(params.alpha) > BOUNDARY_ALPHA or not lo < params.theta < hi


def _newton_polish(params: PteParams, data: CountDataset) -> tuple[PteParams, int]:
    best = params
    best_ll = loglik(best, data)
    steps = 0
    for steps in range(1, NEWTON_STEPS + 1):
        grad = np.array(score(best, data))
        hess = _hessian(best, data)
        if np.max(np.abs(grad)) / data.n < 1e-13:
            break
        if np.any(np.linalg.eigvalsh(hess) >= 0.0):
            break
        step = -np.linalg.solve(hess, grad)
        scale = 1.0
        for _ in range(30):
            a, t = best.alpha + scale * step[0], best.theta + scale * step[1]
            if abs(a) < 1.0 and t > 0.0:
                cand = PteParams(a, t)
                cand_ll = loglik(cand, data)
                if cand_ll >= best_ll:
                    break
            scale *= 0.5
        else:
            break
        best, best_ll = cand, cand_ll
    return best, steps


def fit_mle(
    data: CountDataset,
    init: PteParams | None = None,
    *,
    max_iter: int = DEFAULT_MAX_ITER,
    gtol: float = DEFAULT_GTOL,
) -> FitResult:
    """Maximize the log-likelihood with BFGS on (logit((α+1)/2), log θ).

    The quasi-Newton result is finished with a few safeguarded Newton steps
    on the analytic Hessian.  Convergence means the transformed gradient of
    loglik/n has sup norm below ``gtol`` away from the parameter boundary; a
    non-converged fit is returned, flagged, rather than raised.
    """
    start = init if init is not None else _default_start(data)
    n = data.n

    def objective(z: NDArray[np.float64]) -> tuple[float, NDArray[np.float64]]:
        params = _from_free(z)
        return -loglik(params, data) / n, -_free_gradient(params, data)

    res = optimize.minimize(
        objective,
        _to_free(start),
        jac=True,
        method="BFGS",
        options={"maxiter": max_iter, "gtol": gtol},
    )
    params = _from_free(res.x)
    iterations = int(res.nit)
    logger.debug("BFGS finished after %d iterations: %s", iterations, res.message)

    at_boundary = _is_boundary(params)
    if not at_boundary:
        params, polished = _newton_polish(params, data)
        iterations += polished

    grad_norm = float(np.max(np.abs(_free_gradient(params, data))))
    converged = grad_norm < gtol and not at_boundary and iterations <= max_iter + NEWTON_STEPS
    message = "converged"
    if at_boundary:
        message = "likelihood increases toward the parameter boundary"
    elif not converged:
        message = f"gradient norm {grad_norm:.3g} above tolerance {gtol:.3g}"

    se: tuple[float, float] | None = None
    cov: NDArray[np.float64] | None = None
    if not at_boundary:
        try:
            info = observed_information(params, data)
            se, cov = info.se, info.covariance
        except SingularInformation as e:
            logger.warning("%s", e)

    if not converged:
        logger.warning("MLE did not converge: %s", message)
    else:
        logger.info(
            "MLE alpha=%.6g theta=%.6g after %d iterations",
            params.alpha, params.theta, iterations,
        )

    return FitResult(
        params=params,
        method="mle",
        loglik=loglik(params, data),
        n=n,
        se=se,
        cov=cov,
        converged=converged,
        iterations=iterations,
        at_boundary=at_boundary,
        message=message,
    )


# ---------------------------------------------------------------------------
# Reference law and goodness of fit
# ---------------------------------------------------------------------------


class CountLaw(Protocol):
    @property
    def n_params(self) -> int: ...

    def pmf(self, x: ArrayLike) -> float | NDArray[np.float64]: ...

    def survival(self, x: ArrayLike) -> float | NDArray[np.float64]: ...


@dataclass(frozen=True)
class PoissonLaw:
    lam: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lam) and self.lam > 0.0):
            raise DomainError("lambda", self.lam, "lambda > 0")

    @property
    def n_params(self) -> int:
        return 1

    @property
    def mean(self) -> float:
        return self.lam

    def pmf(self, x: ArrayLike) -> float | NDArray[np.float64]:
        return stats.poisson.pmf(x, self.lam)

    def log_pmf(self, x: ArrayLike) -> float | NDArray[np.float64]:
        return stats.poisson.logpmf(x, self.lam)

    def survival(self, x: ArrayLike) -> float | NDArray[np.float64]:
        """P(X >= x)."""
        return stats.poisson.sf(np.asarray(x) - 1, self.lam)


@dataclass(frozen=True)
class PoissonFit:
    law: PoissonLaw
    loglik: float
    n: int

    @property
    def aic(self) -> float:
        return aic(self.loglik, 1)


def fit_poisson(data: CountDataset) -> PoissonFit:
    """Equi-dispersed baseline: λ̂ = sample mean."""
    if data.m1 <= 0.0:
        raise InfeasibleStatistics(data.p0, data.m1, "Poisson rate needs a positive mean")
    law = PoissonLaw(data.m1)
    ll = float(np.dot(data.frequencies, law.log_pmf(data.values)))
    return PoissonFit(law, ll, data.n)


@dataclass(frozen=True)
class CellGrouping:
    """Cells [lowers[i], lowers[i+1]−1]; the last cell starts at lowers[-1].

    With ``open_tail`` the last cell absorbs every larger value; without it
    the last cell is the single value lowers[-1].
    """

    lowers: tuple[int, ...]
    open_tail: bool = True

    def __post_init__(self) -> None:
        if not self.lowers or self.lowers[0] != 0:
            raise ValueError("cells must start at 0")
        if any(b <= a for a, b in zip(self.lowers, self.lowers[1:])):
            raise ValueError("cell lower bounds must be strictly increasing")

    @classmethod
    def per_value(cls, data: CountDataset, open_tail: bool = True) -> CellGrouping:
        return cls(tuple(range(data.max_value + 1)), open_tail=open_tail)

    def bounds(self) -> list[tuple[int, int | None]]:
        cells: list[tuple[int, int | None]] = [
            (lo, nxt - 1) for lo, nxt in zip(self.lowers, self.lowers[1:])
        ]
        last = self.lowers[-1]
        cells.append((last, None if self.open_tail else last))
        return cells

    def labels(self) -> list[str]:
        return [cell_label(lo, hi) for lo, hi in self.bounds()]

    def observed(self, data: CountDataset) -> list[int]:
        counts = []
        for lo, hi in self.bounds():
            mask = data.values >= lo
            if hi is not None:
                mask &= data.values <= hi
            counts.append(int(data.frequencies[mask].sum()))
        if sum(counts) != data.n:
            raise ValueError(
                f"cells cover {sum(counts)} of {data.n} observations; "
                "the grouping must partition the observed support"
            )
        return counts


def cell_label(lower: int, upper: int | None) -> str:
    if upper is None:
        return f"{lower}+"
    if upper == lower:
        return str(lower)
    return f"{lower}-{upper}"


@dataclass(frozen=True)
class Cell:
    lower: int
    upper: int | None
    observed: int
    expected: float

    @property
    def label(self) -> str:
        return cell_label(self.lower, self.upper)


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    cells: tuple[Cell, ...]
    dof: int
    p_value: float


def expected_frequencies(
    law: CountLaw, data: CountDataset, grouping: CellGrouping | None = None
) -> tuple[Cell, ...]:
    grouping = grouping or CellGrouping.per_value(data)
    cells = []
    for (lo, hi), observed in zip(grouping.bounds(), grouping.observed(data)):
        if hi is None:
            prob = float(law.survival(lo))
        else:
            prob = float(np.sum(law.pmf(np.arange(lo, hi + 1))))
        cells.append(Cell(lo, hi, observed, data.n * prob))
    return tuple(cells)


def gof_chi_square(
    law: CountLaw, data: CountDataset, grouping: CellGrouping | None = None
) -> ChiSquareResult:
    """Pearson chi-square of observed against expected cell counts."""
    cells = expected_frequencies(law, data, grouping)
    for cell in cells:
        if cell.expected <= 0.0:
            raise EmptyCell(cell.lower, cell.upper)
    statistic = math.fsum((c.observed - c.expected) ** 2 / c.expected for c in cells)
    dof = len(cells) - 1 - law.n_params
    p_value = float(stats.chi2.sf(statistic, dof)) if dof > 0 else float("nan")
    return ChiSquareResult(statistic, cells, dof, p_value)
