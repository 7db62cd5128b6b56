"""Poisson–transmuted-exponential count models: the law, its estimators,
compound aggregate-loss evaluation and log-link regression."""

from __future__ import annotations

from .distribution import MomentSummary, PteParams, RngStream
from .errors import DataError, DomainError, NumericalError, PtexError
from .estimation import CountDataset, FitResult

__version__ = "0.1.0"

__all__ = [
    "CountDataset",
    "DataError",
    "DomainError",
    "FitResult",
    "MomentSummary",
    "NumericalError",
    "PtexError",
    "PteParams",
    "RngStream",
    "__version__",
]
