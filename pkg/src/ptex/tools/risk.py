from __future__ import annotations

from typing import Any

from mcp.server.fastmcp import Context, FastMCP

from ..datasets import parse_grid, parse_severity_spec
from ..distribution import PteParams
from ..reports import risk_payload
from ..risk import CompoundDistribution


def register(mcp: FastMCP) -> None:

    @mcp.tool(
        description="Aggregate-loss table for PTE claim counts. severity is "
        "'exp:RATE', 'erlang2:RATE' or 'discrete:PATH' (CSV of claim size, "
        "probability). Continuous severities are evaluated on grid "
        "'START:STOP:STEP'; discrete ones give P(S = s) for s = 0..s_max."
    )
    async def compound_loss(
        ctx: Context,
        alpha: float,
        theta: float,
        severity: str,
        grid: str = "0:10:0.5",
        s_max: int = 50,
    ) -> dict[str, Any]:
        app = ctx.request_context.lifespan_context
        dist = CompoundDistribution(PteParams(alpha, theta), parse_severity_spec(severity))
        return risk_payload(
            dist,
            grid=parse_grid(grid),
            s_max=s_max,
            max_rows=app.config.max_table_rows,
        )
