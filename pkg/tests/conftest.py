from __future__ import annotations

import pytest

from ptex.datasets import embedded_dataset
from ptex.distribution import PteParams, RngStream
from ptex.estimation import CountDataset, FitResult, fit_mle

# Rounded seizure-data MLE as tabulated alongside the data.
TABLE_PARAMS = PteParams(-0.701, 0.873)


@pytest.fixture
def seizure() -> CountDataset:
    return embedded_dataset("seizure")


@pytest.fixture(scope="session")
def seizure_mle() -> FitResult:
    return fit_mle(embedded_dataset("seizure"))


@pytest.fixture
def rng() -> RngStream:
    return RngStream(20240521)
