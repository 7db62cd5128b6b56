from __future__ import annotations

import math

import mpmath
import numpy as np
import pandas as pd
import pytest
from scipy.special import gammaln

from ptex.distribution import PteParams, RngStream, sample
from ptex.errors import DataError, DomainError, RankDeficientDesign
from ptex.estimation import CountDataset, loglik
from ptex.regression import (
    INTERCEPT,
    RegressionData,
    fit_poisson_baseline,
    fit_regression,
    gradient_regression,
    loglik_regression,
    predict_mean,
    reparam_to_pte,
    simulate_response,
)
from ptex.regression import _hessian_steps


def _random_data(seed: int, n: int = 30, s: int = 3) -> RegressionData:
    gen = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), gen.normal(size=(n, s - 1))])
    y = gen.poisson(np.exp(0.4 + 0.3 * X[:, 1]))
    return RegressionData(X, y, (INTERCEPT, *[f"x{i}" for i in range(1, s)]))


@pytest.fixture(scope="module")
def seizure_design() -> RegressionData:
    from ptex.datasets import embedded_dataset

    return RegressionData.from_counts(embedded_dataset("seizure"))


@pytest.mark.parametrize(
    "nu, mu, alpha, theta",
    [(2.0, 1.0, 0.0, 1.0), (2.701, 1.547, -0.701, 0.873), (1.0, 2.0, 1.0, 0.25)],
)
def test_reparam(nu, mu, alpha, theta):
    params = reparam_to_pte(nu, mu)
    assert params.alpha == pytest.approx(alpha, abs=1e-12)
    assert params.theta == pytest.approx(theta, abs=1e-3)
    assert params.mean == pytest.approx(mu, rel=1e-14)


@pytest.mark.parametrize("nu, mu", [(0.5, 1.0), (3.5, 1.0), (2.0, 0.0), (2.0, float("nan"))])
def test_reparam_rejects(nu, mu):
    with pytest.raises(DomainError):
        reparam_to_pte(nu, mu)


def test_design_validation():
    with pytest.raises(ValueError):
        RegressionData(np.array([[2.0], [1.0]]), np.array([0, 1]), (INTERCEPT,))
    with pytest.raises(ValueError):
        RegressionData(np.array([[1.0, 0.0], [1.0, 0.0]]), np.array([0, 1]), (INTERCEPT, "z"))
    with pytest.raises(ValueError):
        RegressionData(np.ones((2, 1)), np.array([0.5, 1.0]), (INTERCEPT,))
    with pytest.raises(ValueError):
        RegressionData(np.ones((1, 2)), np.array([1]), (INTERCEPT, "x"))


def test_intercept_only_reduces_to_count_loglik(seizure, seizure_design):
    nu = 2.3
    beta = [math.log(seizure.m1)]
    expected = loglik(reparam_to_pte(nu, seizure.m1), seizure)
    assert loglik_regression(nu, beta, seizure_design) == pytest.approx(expected, abs=1e-10)


def test_geometric_case():
    data = _random_data(4)
    beta = np.array([0.2, -0.3, 0.1])
    mu = np.exp(data.X @ beta)
    theta = 1.0 / mu
    expected = np.sum(np.log(theta) - (data.y + 1) * np.log1p(theta))
    assert loglik_regression(2.0, beta, data) == pytest.approx(expected, rel=1e-12)


def test_loglik_extended_precision():
    mpmath.mp.dps = 40
    data = _random_data(8, n=12)
    nu, beta = 1.4, np.array([0.1, 0.5, -0.7])
    total = mpmath.mpf(0)
    for row, y in zip(data.X, data.y):
        mu = mpmath.exp(mpmath.fsum(mpmath.mpf(float(x)) * mpmath.mpf(float(b)) for x, b in zip(row, beta)))
        a, t = 2 - mpmath.mpf(nu), mpmath.mpf(nu) / (2 * mu)
        total += mpmath.log(t * ((1 - a) / (1 + t) ** (int(y) + 1) + 2 * a / (1 + 2 * t) ** (int(y) + 1)))
    assert loglik_regression(nu, beta, data) == pytest.approx(float(total), rel=1e-11)


def test_loglik_row_order():
    data = _random_data(5)
    perm = np.random.default_rng(0).permutation(data.n)
    shuffled = RegressionData(data.X[perm], data.y[perm], data.columns)
    beta = [0.3, 0.1, -0.2]
    assert loglik_regression(1.7, beta, shuffled) == pytest.approx(
        loglik_regression(1.7, beta, data), rel=1e-13
    )


def test_loglik_clamps_extreme_predictors():
    data = _random_data(6)
    assert math.isfinite(loglik_regression(2.5, [900.0, 0.0, 0.0], data))
    assert math.isfinite(loglik_regression(2.5, [-900.0, 0.0, 0.0], data))


@pytest.mark.parametrize("seed", range(20))
def test_gradient_matches_finite_differences(seed):
    gen = np.random.default_rng(100 + seed)
    data = _random_data(seed)
    nu = float(gen.uniform(1.1, 2.9))
    beta = gen.normal(scale=0.3, size=data.s)
    analytic = gradient_regression(nu, beta, data)
    h = 1e-6
    point = np.concatenate([[nu], beta])
    numeric = np.empty_like(point)
    for j in range(point.size):
        up, down = point.copy(), point.copy()
        up[j] += h
        down[j] -= h
        numeric[j] = (
            loglik_regression(up[0], up[1:], data) - loglik_regression(down[0], down[1:], data)
        ) / (2 * h)
    np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-6)


def test_collinear_design():
    gen = np.random.default_rng(1)
    x = gen.normal(size=20)
    data = RegressionData(np.column_stack([np.ones(20), x, 2 * x]), gen.poisson(1.0, 20), (INTERCEPT, "x", "x2"))
    with pytest.raises(RankDeficientDesign):
        fit_regression(data)
    with pytest.raises(RankDeficientDesign):
        fit_poisson_baseline(data)


def test_poisson_baseline_on_seizure(seizure_design):
    base = fit_poisson_baseline(seizure_design)
    assert math.exp(base.beta[0]) == pytest.approx(1.544, abs=1e-3)
    assert base.loglik == pytest.approx(-636.05, abs=0.1)
    assert base.aic == pytest.approx(-2 * base.loglik + 2)
    preds = [predict_mean(base, row) for row in seizure_design.X]
    assert np.mean(preds) == pytest.approx(seizure_design.y.mean(), rel=1e-8)


def test_poisson_baseline_constant_response():
    data = RegressionData(np.ones((10, 1)), np.full(10, 3), (INTERCEPT,))
    base = fit_poisson_baseline(data)
    assert base.beta[0] == pytest.approx(math.log(3), rel=1e-8)
    # Σ y log λ − λ − log y! at λ = 3
    assert base.loglik == pytest.approx(10 * (3 * math.log(3) - 3 - gammaln(4)), rel=1e-10)


def test_intercept_only_fit_matches_pooled_mle(seizure_design, seizure_mle):
    fit = fit_regression(seizure_design)
    assert fit.converged
    assert fit.nu == pytest.approx(2.701, abs=0.02)
    assert fit.loglik == pytest.approx(-594.85, abs=0.1)
    assert fit.loglik == pytest.approx(seizure_mle.loglik, abs=1e-6)
    assert fit.aic == -2.0 * fit.loglik + 2.0 * 2
    assert [r.name for r in fit.summary_rows()] == [INTERCEPT, "nu"]
    assert np.all(np.isfinite(fit.se)) and np.all(fit.se > 0)
    np.testing.assert_allclose(fit.cov, fit.cov.T)


def test_predict_mean():
    data = _random_data(9)
    fit = fit_regression(data)
    assert predict_mean(fit, [1.0, 0.0, 0.0]) == pytest.approx(math.exp(fit.beta[0]))
    assert all(predict_mean(fit, row) > 0 for row in data.X)
    with pytest.raises(ValueError):
        predict_mean(fit, [1.0, 0.0])


def test_hessian_steps_stay_inside_nu_range():
    point = np.array([3.0 - 2e-6, 0.4])
    steps = _hessian_steps(point)
    assert point[0] + steps[0] <= 3.0
    assert steps[0] == pytest.approx(1e-6)
    assert steps[1] == pytest.approx(np.finfo(float).eps ** (1 / 3) * 0.4)
    assert _hessian_steps(np.array([1.0 + 4e-6, -2.0]))[0] == pytest.approx(2e-6)


@pytest.mark.parametrize("seed", [2, 4, 6, 7, 8])
def test_fit_close_to_upper_nu_edge(seed):
    # alpha = -1 is the nu = 3 edge
    counts = sample(PteParams(-1.0, 1.5), 400, RngStream(seed))
    data = RegressionData(np.ones((400, 1)), counts, (INTERCEPT,))
    fit = fit_regression(data)
    assert 1.0 <= fit.nu <= 3.0
    assert fit.nu > 2.9
    assert math.isfinite(fit.loglik)
    assert fit.cov.shape == (2, 2)
    assert np.all(np.isnan(fit.cov)) or np.allclose(fit.cov, fit.cov.T)
    assert [r.name for r in fit.summary_rows()] == [INTERCEPT, "nu"]


@pytest.mark.slow
def test_synthetic_recovery():
    gen = np.random.default_rng(2024)
    n, nu, beta = 5000, 2.5, np.array([0.5, 0.3, -0.2])
    X = np.column_stack([np.ones(n), gen.normal(size=(n, 2))])
    y = simulate_response(nu, beta, X, RngStream(2024))
    fit = fit_regression(RegressionData(X, y, (INTERCEPT, "x1", "x2")))
    assert fit.converged
    truth = np.concatenate([[nu], beta])
    estimate = np.concatenate([[fit.nu], fit.beta])
    assert np.all(np.abs(estimate - truth) < 3 * fit.se)


@pytest.mark.slow
def test_poisson_recovery():
    gen = np.random.default_rng(7)
    n, beta = 4000, np.array([0.2, -0.4])
    X = np.column_stack([np.ones(n), gen.normal(size=n)])
    y = gen.poisson(np.exp(X @ beta))
    base = fit_poisson_baseline(RegressionData(X, y, (INTERCEPT, "x")))
    assert np.all(np.abs(base.beta - beta) < 3 * base.se)


def test_from_frame_reports_missing_column():
    frame = pd.DataFrame({"y": [0, 1, 2], "age": [30.0, 40.0, 50.0]})
    with pytest.raises(DataError, match="'income'"):
        RegressionData.from_frame(frame, "y", ["age", "income"])


def test_from_csv(tmp_path):
    path = tmp_path / "visits.csv"
    path.write_text("visits,age,chronic\n0,1.2,0\n3,0.4,1\n1,-0.3,2\n2,0.0,0\n")
    data = RegressionData.from_csv(path, "visits", ["age", "chronic"])
    assert data.columns == (INTERCEPT, "age", "chronic")
    assert data.y.tolist() == [0, 3, 1, 2]
    assert data.X[:, 0].tolist() == [1.0] * 4
    everything = RegressionData.from_csv(path, "visits")
    assert everything.columns == data.columns


def test_from_csv_non_numeric_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("y,x\n0,1.0\n1,abc\n")
    with pytest.raises(DataError) as excinfo:
        RegressionData.from_csv(path, "y", ["x"])
    assert excinfo.value.line == 3
    assert "'x'" in str(excinfo.value)


def test_from_counts_expands_rows():
    data = RegressionData.from_counts(CountDataset.from_pairs([(0, 2), (3, 1)]))
    assert data.y.tolist() == [0, 0, 3]
    assert data.s == 1
