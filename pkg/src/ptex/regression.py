"""PTE count regression with a log-link mean and a Poisson GLM baseline.

The count law is reparametrized by its mean: ν = 2 − α, θ_i = ν/(2μ_i),
log μ_i = x_iᵀβ.  ν ranges over [1, 3].
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import statsmodels.api as sm
from numpy.typing import ArrayLike, NDArray
from scipy import optimize, special, stats
from statsmodels.tools.numdiff import approx_fprime

from .distribution import PteParams, RngStream, _draw, _log_pmf_terms
from .errors import DataError, DomainError, NonConvergence, RankDeficientDesign
from .estimation import CountDataset, _score_terms

logger = logging.getLogger(__name__)

INTERCEPT = "(Intercept)"
ETA_CLAMP = 700.0
NU_EDGE = 1e-8
DEFAULT_MAX_ITER = 2000
DEFAULT_GTOL = 1e-6


@dataclass(frozen=True, eq=False)
class RegressionData:
    X: NDArray[np.float64]
    y: NDArray[np.int64]
    columns: tuple[str, ...]

    def __post_init__(self) -> None:
        X = np.array(self.X, dtype=np.float64)
        y = np.asarray(self.y)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError("design must be n x s and response length n")
        if len(self.columns) != X.shape[1]:
            raise ValueError("one column name per design column is required")
        if X.shape[0] < X.shape[1]:
            raise ValueError(f"need n >= s, got n={X.shape[0]}, s={X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise ValueError("design matrix must be finite")
        if not np.all(X[:, 0] == 1.0):
            raise ValueError("first design column must be the all-ones intercept")
        zero = [c for c, col in zip(self.columns, X.T) if not np.any(col)]
        if zero:
            raise ValueError(f"design columns are identically zero: {', '.join(zero)}")
        if y.dtype.kind not in "iuf" or not np.all(np.isfinite(y)) or np.any(y != np.floor(y)):
            raise ValueError("responses must be finite integers")
        if np.any(y < 0):
            raise ValueError("responses must be non-negative")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y.astype(np.int64))
        object.__setattr__(self, "columns", tuple(self.columns))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def s(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        response: str,
        covariates: Sequence[str] | None = None,
        *,
        source: str | Path | None = None,
    ) -> RegressionData:
        if covariates is None:
            covariates = [c for c in frame.columns if c != response]
        for name in [response, *covariates]:
            if name not in frame.columns:
                raise DataError(f"column {name!r} not found", source)
        numeric = {name: _numeric_column(frame, name, source) for name in [response, *covariates]}
        y = numeric[response]
        bad = np.flatnonzero((y < 0) | (y != np.floor(y)))
        if bad.size:
            raise DataError(
                f"column {response!r}: response {y[bad[0]]!r} is not a non-negative integer",
                source,
                line=int(bad[0]) + 2 if source is not None else None,
            )
        X = np.column_stack([np.ones(len(frame))] + [numeric[c] for c in covariates])
        return cls(X, y.astype(np.int64), (INTERCEPT, *covariates))

    @classmethod
    def from_csv(
        cls, path: str | Path, response: str, covariates: Sequence[str] | None = None
    ) -> RegressionData:
        """Load a headed CSV; covariates default to every non-response column."""
        try:
            frame = pd.read_csv(path)
        except FileNotFoundError as e:
            raise DataError("file not found", path) from e
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise DataError(f"cannot parse CSV: {e}", path) from e
        if frame.empty:
            raise DataError("no data rows", path)
        logger.info("Loaded %d rows from %s", len(frame), path)
        return cls.from_frame(frame, response, covariates, source=path)

    @classmethod
    def from_counts(cls, data: CountDataset) -> RegressionData:
        """Intercept-only design, one row per observation."""
        y = data.expand()
        return cls(np.ones((y.size, 1)), y, (INTERCEPT,))


def _numeric_column(
    frame: pd.DataFrame, name: str, source: str | Path | None
) -> NDArray[np.float64]:
    raw = frame[name]
    values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=np.float64, na_value=np.nan)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        row = int(bad[0])
        # header is line 1
        raise DataError(
            f"column {name!r}: non-numeric value {raw.iloc[row]!r}",
            source,
            line=row + 2 if source is not None else None,
        )
    return values


@dataclass(frozen=True)
class CoefficientRow:
    name: str
    estimate: float
    se: float
    t: float
    p: float


def _coefficient_row(name: str, estimate: float, se: float) -> CoefficientRow:
    if math.isfinite(se) and se > 0.0:
        t = estimate / se
        p = float(2.0 * stats.norm.sf(abs(t)))
    else:
        t = p = float("nan")
    return CoefficientRow(name, float(estimate), float(se), t, p)


@dataclass(frozen=True, eq=False)
class RegressionFit:
    nu: float
    beta: NDArray[np.float64]
    cov: NDArray[np.float64]
    loglik: float
    columns: tuple[str, ...]
    n: int
    converged: bool = True
    iterations: int = 0
    at_boundary: bool = False
    clamped: bool = False
    message: str = ""

    @property
    def alpha(self) -> float:
        return 2.0 - self.nu

    @property
    def n_params(self) -> int:
        return self.beta.size + 1

    @property
    def aic(self) -> float:
        return -2.0 * self.loglik + 2.0 * self.n_params

    @property
    def se(self) -> NDArray[np.float64]:
        """Standard errors ordered (ν, β_1, ..., β_s)."""
        return np.sqrt(np.diag(self.cov))

    def summary_rows(self) -> list[CoefficientRow]:
        se = self.se
        rows = [
            _coefficient_row(name, b, s)
            for name, b, s in zip(self.columns, self.beta, se[1:])
        ]
        rows.append(_coefficient_row("nu", self.nu, se[0]))
        return rows


@dataclass(frozen=True, eq=False)
class PoissonBaseline:
    beta: NDArray[np.float64]
    se: NDArray[np.float64]
    loglik: float
    columns: tuple[str, ...]
    n: int
    iterations: int = 0

    @property
    def aic(self) -> float:
        return -2.0 * self.loglik + 2.0 * self.beta.size

    def summary_rows(self) -> list[CoefficientRow]:
        return [_coefficient_row(c, b, s) for c, b, s in zip(self.columns, self.beta, self.se)]


def reparam_to_pte(nu: float, mu: float) -> PteParams:
    """α = 2 − ν, θ = ν/(2μ); the law's mean is μ."""
    if not (math.isfinite(nu) and 1.0 <= nu <= 3.0):
        raise DomainError("nu", nu, "1 <= nu <= 3")
    if not (math.isfinite(mu) and mu > 0.0):
        raise DomainError("mu", mu, "mu > 0")
    return PteParams(2.0 - nu, nu / (2.0 * mu))


def linear_predictor(
    beta: ArrayLike, X: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """x_iᵀβ clamped to ±700, with the mask of clamped rows."""
    eta = X @ np.asarray(beta, dtype=np.float64)
    clamped = np.abs(eta) > ETA_CLAMP
    return np.clip(eta, -ETA_CLAMP, ETA_CLAMP), clamped


def _check_nu(nu: float) -> None:
    if not (math.isfinite(nu) and 1.0 <= nu <= 3.0):
        raise DomainError("nu", nu, "1 <= nu <= 3")


def loglik_regression(nu: float, beta: ArrayLike, data: RegressionData) -> float:
    _check_nu(nu)
    eta, clamped = linear_predictor(beta, data.X)
    if clamped.any():
        logger.debug("Clamped %d linear predictors at +/-%g", int(clamped.sum()), ETA_CLAMP)
    theta = nu / 2.0 * np.exp(-eta)
    terms = _log_pmf_terms(2.0 - nu, theta, data.y.astype(np.float64))
    return float(np.sum(terms))


def gradient_regression(
    nu: float, beta: ArrayLike, data: RegressionData
) -> NDArray[np.float64]:
    """(∂l/∂ν, ∂l/∂β) through θ_i = ν e^{−η_i}/2."""
    _check_nu(nu)
    eta, clamped = linear_predictor(beta, data.X)
    theta = nu / 2.0 * np.exp(-eta)
    d_alpha, d_theta = _score_terms(2.0 - nu, theta, data.y.astype(np.float64))
    d_nu = np.sum(-d_alpha + d_theta * theta / nu)
    d_beta = -data.X.T @ np.where(clamped, 0.0, d_theta * theta)
    return np.concatenate([[d_nu], d_beta])


def _check_rank(X: NDArray[np.float64]) -> None:
    rank = int(np.linalg.matrix_rank(X))
    if rank < X.shape[1]:
        raise RankDeficientDesign(rank, X.shape[1])


def fit_poisson_baseline(data: RegressionData, *, max_iter: int = 100) -> PoissonBaseline:
    """Poisson log-link GLM by iteratively reweighted least squares."""
    _check_rank(data.X)
    model = sm.GLM(data.y, data.X, family=sm.families.Poisson())
    res = model.fit(method="IRLS", maxiter=max_iter)
    if not res.converged:
        raise NonConvergence(
            f"Poisson IRLS did not converge in {max_iter} iterations", max_iter
        )
    iterations = int(res.fit_history.get("iteration", 0))
    logger.info("Poisson baseline loglik %.6f", res.llf)
    return PoissonBaseline(
        beta=np.asarray(res.params, dtype=np.float64),
        se=np.asarray(res.bse, dtype=np.float64),
        loglik=float(res.llf),
        columns=data.columns,
        n=data.n,
        iterations=iterations,
    )


def _nu_from_free(u: float) -> float:
    nu = 1.0 + 2.0 * float(special.expit(u))
    return min(3.0 - NU_EDGE, max(1.0 + NU_EDGE, nu))


def _nu_to_free(nu: float) -> float:
    return float(special.logit((nu - 1.0) / 2.0))


def _hessian_steps(point: NDArray[np.float64]) -> NDArray[np.float64]:
    """Central-difference steps; the ν step stays inside [1, 3]."""
    steps = np.finfo(np.float64).eps ** (1.0 / 3.0) * np.maximum(np.abs(point), 0.1)
    room = min(point[0] - 1.0, 3.0 - point[0])
    steps[0] = min(steps[0], 0.5 * room)
    return steps


def fit_regression(
    data: RegressionData,
    init: tuple[float, ArrayLike] | None = None,
    *,
    max_iter: int = DEFAULT_MAX_ITER,
    gtol: float = DEFAULT_GTOL,
) -> RegressionFit:
    """Maximize the PTE regression likelihood over (ν, β).

    ν runs through 1 + 2·sigmoid(u); β starts from the Poisson GLM and ν
    from 2.  Standard errors come from a central finite-difference Jacobian
    of the analytic gradient.
    """
    _check_rank(data.X)
    if init is None:
        nu0, beta0 = 2.0, fit_poisson_baseline(data).beta
    else:
        nu0, beta0 = float(init[0]), np.asarray(init[1], dtype=np.float64)
        _check_nu(nu0)
        if beta0.shape != (data.s,):
            raise ValueError(f"initial beta must have length {data.s}")
    n = data.n

    def objective(z: NDArray[np.float64]) -> tuple[float, NDArray[np.float64]]:
        nu = _nu_from_free(z[0])
        beta = z[1:]
        grad = gradient_regression(nu, beta, data)
        s = (nu - 1.0) / 2.0
        grad[0] *= 2.0 * s * (1.0 - s)
        return -loglik_regression(nu, beta, data) / n, -grad / n

    z0 = np.concatenate([[_nu_to_free(min(3.0 - 1e-6, max(1.0 + 1e-6, nu0)))], beta0])
    res = optimize.minimize(
        objective, z0, jac=True, method="BFGS", options={"maxiter": max_iter, "gtol": gtol}
    )
    nu = _nu_from_free(res.x[0])
    beta = np.asarray(res.x[1:], dtype=np.float64)
    _, grad = objective(res.x)
    # sup norm, as BFGS measures it
    grad_norm = float(np.max(np.abs(grad)))
    at_boundary = nu <= 1.0 + 1e-6 or nu >= 3.0 - 1e-6
    clamped = bool(linear_predictor(beta, data.X)[1].any())

    converged = grad_norm < gtol and not at_boundary and not clamped
    if clamped:
        message = "linear predictor clamped at the optimum"
    elif at_boundary:
        message = f"nu at the edge of [1, 3] ({nu:.10g})"
    elif not converged:
        message = f"gradient norm {grad_norm:.3g} above tolerance {gtol:.3g} ({res.message})"
    else:
        message = "converged"

    cov = np.full((data.s + 1, data.s + 1), np.nan)
    if not at_boundary:
        point = np.concatenate([[nu], beta])
        try:
            hess = approx_fprime(
                point,
                lambda p: gradient_regression(p[0], p[1:], data),
                epsilon=_hessian_steps(point),
                centered=True,
            )
            info = -0.5 * (hess + hess.T)
            np.linalg.cholesky(info)
            cov = np.linalg.inv(info)
        except DomainError as e:
            logger.warning("Regression standard errors unavailable: %s", e)
        except np.linalg.LinAlgError:
            logger.warning("Regression information matrix is not positive definite")

    if converged:
        logger.info("PTE regression nu=%.6g after %d iterations", nu, res.nit)
    else:
        logger.warning("PTE regression did not converge: %s", message)

    return RegressionFit(
        nu=nu,
        beta=beta,
        cov=cov,
        loglik=loglik_regression(nu, beta, data),
        columns=data.columns,
        n=n,
        converged=converged,
        iterations=int(res.nit),
        at_boundary=at_boundary,
        clamped=clamped,
        message=message,
    )


def predict_mean(fit: RegressionFit | PoissonBaseline, x_row: ArrayLike) -> float:
    x = np.asarray(x_row, dtype=np.float64)
    if x.shape != fit.beta.shape:
        raise ValueError(f"covariate row must have length {fit.beta.size}")
    eta = float(np.clip(x @ fit.beta, -ETA_CLAMP, ETA_CLAMP))
    return math.exp(eta)


def simulate_response(
    nu: float, beta: ArrayLike, X: NDArray[np.float64], rng: RngStream
) -> NDArray[np.int64]:
    """One response per design row from the fitted law at (ν, β)."""
    _check_nu(nu)
    eta, _ = linear_predictor(beta, np.asarray(X, dtype=np.float64))
    theta = nu / 2.0 * np.exp(-eta)
    return _draw(2.0 - nu, theta, eta.size, rng)
