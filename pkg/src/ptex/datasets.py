"""Count and severity files, the embedded seizure counts, severity specs."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray

from .errors import DataError, DomainError
from .estimation import CountDataset
from .risk import DiscreteSeverity, Erlang2Severity, ExponentialSeverity, SeverityModel

logger = logging.getLogger(__name__)

# Epileptic seizure counts of 351 patients.
SEIZURE_PAIRS: tuple[tuple[int, int], ...] = (
    (0, 126), (1, 80), (2, 59), (3, 42), (4, 24), (5, 8), (6, 5), (7, 4), (8, 3),
)

EMBEDDED = {"seizure": SEIZURE_PAIRS}


def embedded_dataset(name: str) -> CountDataset:
    try:
        pairs = EMBEDDED[name]
    except KeyError:
        raise DataError(
            f"unknown embedded dataset {name!r}; available: {', '.join(sorted(EMBEDDED))}"
        ) from None
    return CountDataset.from_pairs(pairs, name=name)


def _read_table(path: str | Path) -> pd.DataFrame:
    """Raw string cells, indexed by 1-based file line, blank lines dropped."""
    try:
        frame = pd.read_csv(
            path, header=None, dtype=str, skip_blank_lines=False, skipinitialspace=True
        )
    except FileNotFoundError as e:
        raise DataError("file not found", path) from e
    except pd.errors.EmptyDataError as e:
        raise DataError("file is empty", path) from e
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DataError(f"cannot parse: {e}", path) from e
    frame.index = frame.index + 1
    frame = frame.dropna(how="all")
    if frame.empty:
        raise DataError("file is empty", path)
    return frame


def _is_number(cell: object) -> bool:
    return bool(pd.notna(pd.to_numeric(pd.Series([cell]), errors="coerce")[0]))


def _drop_header(frame: pd.DataFrame, path: str | Path) -> pd.DataFrame:
    first = frame.iloc[0]
    if not all(_is_number(c) for c in first if pd.notna(c)):
        frame = frame.iloc[1:]
        if frame.empty:
            raise DataError("no data rows after the header", path)
    return frame


def _integer_column(
    cells: pd.Series, label: str, path: str | Path
) -> NDArray[np.int64]:
    values = pd.to_numeric(cells, errors="coerce").to_numpy(dtype=np.float64, na_value=np.nan)
    bad = ~np.isfinite(values) | (values < 0) | (values != np.floor(values))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DataError(
            f"{label} must be a non-negative integer, got {cells.iloc[i]!r}",
            path,
            line=int(cells.index[i]),
        )
    return values.astype(np.int64)


def read_count_file(path: str | Path) -> CountDataset:
    """Parse ``value,frequency`` rows (optional header) or one count per line."""
    frame = _drop_header(_read_table(path), path)
    if frame.shape[1] == 1:
        counts = _integer_column(frame.iloc[:, 0], "count", path)
        data = CountDataset.from_counts(counts, name=Path(path).stem)
    elif frame.shape[1] == 2:
        values = _integer_column(frame.iloc[:, 0], "value", path)
        freqs = _integer_column(frame.iloc[:, 1], "frequency", path)
        if freqs.sum() < 1:
            raise DataError("frequencies sum to zero", path)
        data = CountDataset.from_pairs(zip(values, freqs), name=Path(path).stem)
    else:
        raise DataError(
            f"expected 1 or 2 columns, found {frame.shape[1]}", path, line=int(frame.index[0])
        )
    logger.info("Read %d observations from %s", data.n, path)
    return data


def load_counts(source: str) -> CountDataset:
    """An embedded dataset name or a path to a count file."""
    if source in EMBEDDED:
        return embedded_dataset(source)
    return read_count_file(source)


def write_counts(path: str | Path, counts: ArrayLike) -> None:
    np.savetxt(path, np.asarray(counts, dtype=np.int64), fmt="%d")
    logger.info("Wrote %d counts to %s", np.size(counts), path)


def read_severity_csv(path: str | Path) -> DiscreteSeverity:
    """``value,probability`` rows with an optional header; values start at 1."""
    frame = _drop_header(_read_table(path), path)
    if frame.shape[1] != 2:
        raise DataError(f"expected 2 columns, found {frame.shape[1]}", path)
    values = _integer_column(frame.iloc[:, 0], "claim size", path)
    probs = pd.to_numeric(frame.iloc[:, 1], errors="coerce").to_numpy(
        dtype=np.float64, na_value=np.nan
    )
    bad = ~np.isfinite(probs) | (probs < 0)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DataError(
            f"probability must be a non-negative number, got {frame.iloc[i, 1]!r}",
            path,
            line=int(frame.index[i]),
        )
    try:
        return DiscreteSeverity.from_pairs(zip(values, probs))
    except (DomainError, ValueError) as e:
        raise DataError(str(e), path) from e


def parse_severity_spec(spec: str) -> SeverityModel:
    """``exp:RATE``, ``erlang2:RATE`` or ``discrete:PATH``."""
    kind, sep, arg = spec.partition(":")
    if not sep or not arg:
        raise ValueError(
            f"Invalid severity {spec!r}. Expected exp:RATE, erlang2:RATE or discrete:PATH."
        )
    kind = kind.strip().lower()
    if kind == "discrete":
        return read_severity_csv(arg)
    if kind not in ("exp", "erlang2"):
        raise ValueError(f"Unknown severity kind {kind!r} in {spec!r}")
    try:
        rate = float(arg)
    except ValueError:
        raise ValueError(f"Invalid severity rate {arg!r} in {spec!r}") from None
    return ExponentialSeverity(rate) if kind == "exp" else Erlang2Severity(rate)


MAX_GRID_POINTS = 1_000_000


def parse_grid(spec: str) -> NDArray[np.float64]:
    """``START:STOP:STEP`` with STOP included, all values >= 0."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"Invalid grid {spec!r}. Expected START:STOP:STEP.")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ValueError(f"Invalid grid {spec!r}: values must be numbers") from None
    if not (step > 0.0 and 0.0 <= start <= stop) or not np.isfinite(stop):
        raise ValueError(f"Invalid grid {spec!r}: need 0 <= START <= STOP and STEP > 0")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    if count > MAX_GRID_POINTS:
        raise ValueError(f"grid {spec!r} has {count} points, limit is {MAX_GRID_POINTS}")
    return start + step * np.arange(count)
