from __future__ import annotations

from ..datasets import embedded_dataset
from ..estimation import CountDataset
from ..records import METHODS

MAX_SAMPLE = 100_000


def dataset_from_args(
    dataset: str | None, pairs: list[list[int]] | None
) -> CountDataset:
    """Exactly one of an embedded dataset name or inline [value, frequency] pairs."""
    if (dataset is None) == (pairs is None):
        raise ValueError("Pass exactly one of 'dataset' or 'pairs'.")
    if dataset is not None:
        return embedded_dataset(dataset)
    assert pairs is not None
    for pair in pairs:
        if len(pair) != 2:
            raise ValueError(f"Invalid pair {pair!r}. Expected [value, frequency].")
    return CountDataset.from_pairs(((v, f) for v, f in pairs), name="inline")


def validate_method(method: str) -> list[str]:
    if method == "all":
        return list(METHODS)
    if method not in METHODS:
        raise ValueError(
            f"Invalid method '{method}'. Expected one of: {', '.join(METHODS)}, all."
        )
    return [method]


def validate_sample_size(n: int) -> int:
    if not 0 <= n <= MAX_SAMPLE:
        raise ValueError(f"Invalid sample size {n}. Expected 0 <= n <= {MAX_SAMPLE}.")
    return n
