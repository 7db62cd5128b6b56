from __future__ import annotations

from typing import Any

from mcp.server.fastmcp import Context, FastMCP

from ..regression import RegressionData, fit_poisson_baseline, fit_regression
from ..reports import regression_payload


def register(mcp: FastMCP) -> None:

    @mcp.tool(
        description="Fit a PTE log-link count regression to a CSV file with a "
        "header row. response names the count column; covariates defaults to "
        "every other column. Returns estimate, SE, t and p per coefficient plus "
        "the dispersion parameter nu, with a Poisson regression for comparison."
    )
    async def fit_count_regression(
        ctx: Context,
        csv_path: str,
        response: str,
        covariates: list[str] | None = None,
    ) -> dict[str, Any]:
        app = ctx.request_context.lifespan_context
        data = RegressionData.from_csv(csv_path, response, covariates)
        baseline = fit_poisson_baseline(data)
        fit = fit_regression(
            data,
            init=(2.0, baseline.beta),
            max_iter=app.config.regression_max_iter,
            gtol=app.config.regression_gtol,
        )
        return regression_payload(fit, baseline)
