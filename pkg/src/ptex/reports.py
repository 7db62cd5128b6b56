"""JSON-ready payloads shared by the command line and the tool server.

Every number is a full-precision float (non-finite values become None);
rounding happens only when a payload is rendered as a table.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from typing import Any

import numpy as np

from .distribution import PteParams, cdf, mode, moments, pmf, variance_upper_bound
from .errors import EmptyCell, PtexError
from .estimation import (
    CellGrouping,
    ChiSquareResult,
    CountDataset,
    CountLaw,
    FitResult,
    PoissonFit,
    fit_mle,
    fit_moments,
    fit_poisson,
    fit_proportion_moment,
    gof_chi_square,
    loglik,
)
from .records import METHODS, ModelRecord
from .regression import PoissonBaseline, RegressionFit
from .risk import (
    DEFAULT_MAX_TABLE_ROWS,
    CompoundDistribution,
    DiscreteSeverity,
    compound_pmf_discrete,
)

logger = logging.getLogger(__name__)


def _num(x: float | None) -> float | None:
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def dataset_payload(data: CountDataset) -> dict[str, Any]:
    return {
        "name": data.name,
        "n": data.n,
        "mean": data.mean,
        "variance": data.variance,
        "p0": data.p0,
        "digest": data.digest,
        "pairs": data.pairs(),
    }


def run_fits(
    data: CountDataset,
    methods: Sequence[str],
    *,
    max_iter: int = 500,
    gtol: float = 1e-8,
) -> dict[str, FitResult | PtexError]:
    """Fit each named method; with several methods, failures are kept, not raised."""
    out: dict[str, FitResult | PtexError] = {}
    for method in methods:
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
        try:
            if method == "moments":
                out[method] = fit_moments(data)
            elif method == "proportion_moment":
                out[method] = fit_proportion_moment(data)
            else:
                out[method] = fit_mle(data, max_iter=max_iter, gtol=gtol)
        except PtexError as e:
            if len(methods) == 1:
                raise
            logger.warning("%s estimator failed: %s", method, e)
            out[method] = e
    return out


def _cells(data: CountDataset, grouping: CellGrouping) -> list[dict[str, Any]]:
    return [
        {"label": label, "observed": obs}
        for label, obs in zip(grouping.labels(), grouping.observed(data))
    ]


def _gof_entry(law: CountLaw, data: CountDataset, grouping: CellGrouping) -> dict[str, Any]:
    try:
        chi: ChiSquareResult = gof_chi_square(law, data, grouping)
    except EmptyCell as e:
        return {"chi_square": None, "dof": None, "p_value": None, "expected": None,
                "chi_square_error": str(e)}
    return {
        "chi_square": chi.statistic,
        "dof": chi.dof,
        "p_value": _num(chi.p_value),
        "expected": [c.expected for c in chi.cells],
    }


def fit_entry(fit: FitResult, data: CountDataset, grouping: CellGrouping) -> dict[str, Any]:
    se = fit.se or (None, None)
    entry = {
        "method": fit.method,
        "alpha": fit.params.alpha,
        "theta": fit.params.theta,
        "mean": fit.params.mean,
        "se_alpha": _num(se[0]),
        "se_theta": _num(se[1]),
        "loglik": fit.loglik,
        "aic": fit.aic,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "at_boundary": fit.at_boundary,
        "message": fit.message,
    }
    entry.update(_gof_entry(fit.params, data, grouping))
    return entry


def poisson_entry(pfit: PoissonFit, data: CountDataset, grouping: CellGrouping) -> dict[str, Any]:
    entry = {"method": "poisson", "lambda": pfit.law.lam, "loglik": pfit.loglik, "aic": pfit.aic}
    entry.update(_gof_entry(pfit.law, data, grouping))
    return entry


def fit_payload(
    data: CountDataset,
    fits: Mapping[str, FitResult | PtexError],
    *,
    baseline: bool = False,
    open_tail: bool = True,
) -> dict[str, Any]:
    grouping = CellGrouping.per_value(data, open_tail=open_tail)
    cells = _cells(data, grouping)
    entries = []
    for method, fit in fits.items():
        if isinstance(fit, FitResult):
            entries.append(fit_entry(fit, data, grouping))
        else:
            entries.append({"method": method, "error": str(fit)})
    payload: dict[str, Any] = {
        "dataset": dataset_payload(data),
        "grouping": {"lowers": list(grouping.lowers), "open_tail": grouping.open_tail},
        "cells": cells,
        "fits": entries,
        "baseline": None,
    }
    if baseline:
        payload["baseline"] = poisson_entry(fit_poisson(data), data, grouping)
    return payload


def moments_payload(params: PteParams, x_max: int = 10) -> dict[str, Any]:
    summary = moments(params)
    xs = np.arange(x_max + 1)
    return {
        "alpha": params.alpha,
        "theta": params.theta,
        "mean": summary.mean,
        "variance": summary.variance,
        "skewness": summary.skewness,
        "kurtosis": summary.kurtosis,
        "cv": summary.cv,
        "mode": list(mode(params)),
        "variance_upper_bound": _num(variance_upper_bound(params)),
        "table": [
            {"x": int(x), "pmf": float(p), "cdf": float(c)}
            for x, p, c in zip(xs, pmf(params, xs), cdf(params, xs))
        ],
    }


def severity_payload(dist: CompoundDistribution) -> dict[str, Any]:
    sev = dist.severity
    if isinstance(sev, DiscreteSeverity):
        return {"kind": sev.kind, "max_value": sev.max_value, "mean": sev.mean}
    return {"kind": sev.kind, "rate": sev.rate, "mean": sev.mean}


def risk_payload(
    dist: CompoundDistribution,
    *,
    grid: Sequence[float] | None = None,
    s_max: int | None = None,
    max_rows: int = DEFAULT_MAX_TABLE_ROWS,
) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "alpha": dist.frequency.alpha,
        "theta": dist.frequency.theta,
        "severity": severity_payload(dist),
        "atom0": dist.atom0,
        "mean": dist.mean,
    }
    if isinstance(dist.severity, DiscreteSeverity):
        if s_max is None:
            raise ValueError("a discrete severity needs s_max")
        masses = compound_pmf_discrete(dist.frequency, dist.severity, s_max, max_rows=max_rows)
        payload["rows"] = [{"s": s, "pmf": float(m)} for s, m in enumerate(masses)]
        payload["total"] = math.fsum(masses)
    else:
        if grid is None:
            raise ValueError("a continuous severity needs a grid")
        ys = np.asarray(grid, dtype=np.float64)
        payload["rows"] = [
            {"y": float(y), "density": float(d)} for y, d in zip(ys, dist.density(ys))
        ]
    return payload


def regression_payload(fit: RegressionFit, baseline: PoissonBaseline | None) -> dict[str, Any]:
    def rows(items: Sequence[Any]) -> list[dict[str, Any]]:
        return [
            {"name": r.name, "estimate": r.estimate, "se": _num(r.se), "t": _num(r.t), "p": _num(r.p)}
            for r in items
        ]

    payload: dict[str, Any] = {
        "n": fit.n,
        "pte": {
            "coefficients": rows(fit.summary_rows()),
            "nu": fit.nu,
            "alpha": fit.alpha,
            "loglik": fit.loglik,
            "aic": fit.aic,
            "converged": fit.converged,
            "iterations": fit.iterations,
            "at_boundary": fit.at_boundary,
            "message": fit.message,
        },
        "poisson": None,
    }
    if baseline is not None:
        payload["poisson"] = {
            "coefficients": rows(baseline.summary_rows()),
            "loglik": baseline.loglik,
            "aic": baseline.aic,
        }
    return payload


def gof_payload(
    record: ModelRecord, data: CountDataset, *, open_tail: bool = True
) -> dict[str, Any]:
    params = record.params
    grouping = CellGrouping.per_value(data, open_tail=open_tail)
    ll = loglik(params, data)
    digest_match = record.dataset_digest == data.digest
    if not digest_match:
        logger.warning(
            "Model was fitted on dataset %s..., evaluating on %s...",
            record.dataset_digest[:12], data.digest[:12],
        )
    payload = {
        "model": record.to_dict(),
        "dataset": dataset_payload(data),
        "digest_match": digest_match,
        "loglik": ll,
        "aic": -2.0 * ll + 2.0 * params.n_params,
        "cells": _cells(data, grouping),
    }
    payload.update(_gof_entry(params, data, grouping))
    return payload
