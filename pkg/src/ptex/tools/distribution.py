from __future__ import annotations

from typing import Any

from mcp.server.fastmcp import Context, FastMCP

from ..distribution import PteParams, RngStream, sample
from ..reports import moments_payload
from ._inputs import validate_sample_size


def register(mcp: FastMCP) -> None:

    @mcp.tool(
        description="Describe a PTE count law with parameters alpha (-1..1) and "
        "theta (> 0): mean, variance, skewness, kurtosis, coefficient of "
        "variation, mode(s) and a pmf/cdf table for x = 0..x_max."
    )
    async def pte_distribution(
        alpha: float,
        theta: float,
        x_max: int = 10,
    ) -> dict[str, Any]:
        if x_max < 0:
            raise ValueError(f"Invalid x_max {x_max}. Expected x_max >= 0.")
        return moments_payload(PteParams(alpha, theta), x_max)

    @mcp.tool(
        description="Draw n counts (at most 100000) from a PTE law. Pass seed "
        "for reproducible draws; otherwise the configured default seed is used."
    )
    async def pte_sample(
        ctx: Context,
        alpha: float,
        theta: float,
        n: int,
        seed: int | None = None,
    ) -> dict[str, Any]:
        app = ctx.request_context.lifespan_context
        validate_sample_size(n)
        rng = RngStream(seed if seed is not None else app.config.default_seed)
        counts = sample(PteParams(alpha, theta), n, rng)
        return {"seed": rng.seed, "counts": counts.tolist()}
