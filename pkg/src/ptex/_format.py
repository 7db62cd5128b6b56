from __future__ import annotations

import math
import os
from collections.abc import Sequence
from functools import partial
from typing import TextIO

import pandas as pd

_BOLD = "\033[1m"
_RESET = "\033[0m"


def use_color(stream: TextIO, no_color: bool = False) -> bool:
    if no_color or os.environ.get("PTEX_NO_COLOR"):
        return False
    return bool(getattr(stream, "isatty", lambda: False)())


def fmt_value(value: object, precision: int) -> str:
    """Significant-digit rendering of numbers; everything else via str()."""
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.{precision}g}"
    return str(value)


def _bold(text: str, color: bool) -> str:
    return f"{_BOLD}{text}{_RESET}" if color else text


def _cells(rows: Sequence[Sequence[object]], columns: Sequence[str], precision: int) -> pd.DataFrame:
    # object dtype keeps None, bool and int cells as they are until formatting
    frame = pd.DataFrame([list(r) for r in rows], columns=list(columns), dtype=object)
    return frame.map(partial(fmt_value, precision=precision))


def render_table(
    headers: Sequence[str],
    rows: Sequence[Sequence[object]],
    *,
    precision: int = 6,
    title: str | None = None,
    color: bool = False,
) -> str:
    lines = [_bold(title, color)] if title else []
    if not rows:
        return "\n".join([*lines, _bold("  ".join(headers), color)])
    text = _cells(rows, headers, precision).to_string(index=False)
    head, _, body = text.partition("\n")
    lines += [_bold(head, color), body]
    return "\n".join(lines)


def render_pairs(
    pairs: Sequence[tuple[str, object]],
    *,
    precision: int = 6,
    title: str | None = None,
    color: bool = False,
) -> str:
    """Key/value block, keys left-aligned."""
    lines = [_bold(title, color)] if title else []
    if pairs:
        frame = _cells(pairs, ["key", "value"], precision)
        width = int(frame["key"].str.len().max())
        lines.append(
            frame.to_string(
                index=False,
                header=False,
                formatters={"key": lambda k: k.ljust(width), "value": str},
            )
        )
    return "\n".join(lines)
