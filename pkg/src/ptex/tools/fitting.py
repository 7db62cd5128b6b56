from __future__ import annotations

from typing import Any

from mcp.server.fastmcp import Context, FastMCP

from ..datasets import load_counts
from ..records import ModelRecord
from ..reports import fit_payload, gof_payload, run_fits
from ._inputs import dataset_from_args, validate_method


def register(mcp: FastMCP) -> None:

    @mcp.tool(
        description="Fit a PTE count law to a dataset. Pass dataset='seizure' for "
        "the embedded epileptic seizure counts, or pairs=[[value, frequency], ...]. "
        "method is one of moments, proportion_moment, mle or all. "
        "Set baseline=true to add the Poisson comparison and closed_tail=true to "
        "make the last chi-square cell hold only the largest value."
    )
    async def fit_counts(
        ctx: Context,
        dataset: str | None = None,
        pairs: list[list[int]] | None = None,
        method: str = "mle",
        baseline: bool = False,
        closed_tail: bool = False,
    ) -> dict[str, Any]:
        app = ctx.request_context.lifespan_context
        data = dataset_from_args(dataset, pairs)
        methods = validate_method(method)

        cache_key = (data.digest, method, app.config.mle_max_iter, app.config.mle_gtol)
        fits = app.cache.get(cache_key)
        if fits is None:
            fits = run_fits(
                data, methods, max_iter=app.config.mle_max_iter, gtol=app.config.mle_gtol
            )
            app.cache.set(cache_key, fits)
        return fit_payload(data, fits, baseline=baseline, open_tail=not closed_tail)

    @mcp.tool(
        description="Re-evaluate a saved model record (JSON written by 'ptex fit "
        "--save') on a count dataset: log-likelihood, AIC and chi-square. "
        "data is 'seizure' or a path to a count file."
    )
    async def goodness_of_fit(
        model_path: str,
        data: str = "seizure",
        closed_tail: bool = False,
    ) -> dict[str, Any]:
        record = ModelRecord.load(model_path)
        return gof_payload(record, load_counts(data), open_tail=not closed_tail)
