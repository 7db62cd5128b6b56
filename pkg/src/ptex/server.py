from __future__ import annotations

import logging
import sys
from collections.abc import AsyncIterator
from contextlib import asynccontextmanager
from dataclasses import dataclass

from mcp.server.fastmcp import FastMCP

from .cache import FitCache
from .config import PtexConfig, load_config
from .tools import register_all_tools

logger = logging.getLogger("ptex")


@dataclass
class AppContext:
    config: PtexConfig
    cache: FitCache


@asynccontextmanager
async def app_lifespan(server: FastMCP) -> AsyncIterator[AppContext]:
    logger.info("Starting ptex MCP server...")
    config = load_config()
    cache = FitCache(default_ttl=config.cache_ttl)
    try:
        yield AppContext(config=config, cache=cache)
    finally:
        cache.invalidate()
        logger.info("ptex MCP server stopped.")


mcp = FastMCP(
    "ptex",
    instructions=(
        "Poisson-transmuted-exponential count models. "
        "Use fit_counts to fit a count dataset (the embedded 'seizure' data or "
        "inline value/frequency pairs), pte_distribution for pmf tables and "
        "moments, compound_loss for aggregate-loss tables and "
        "fit_count_regression for log-link regression on a CSV file."
    ),
    lifespan=app_lifespan,
)

register_all_tools(mcp)


def main() -> None:
    # stderr only: stdout carries JSON-RPC
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        stream=sys.stderr,
    )
    mcp.run(transport="stdio")


if __name__ == "__main__":
    main()
