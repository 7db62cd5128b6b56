from __future__ import annotations

import numpy as np
import pytest

from ptex.datasets import (
    embedded_dataset,
    load_counts,
    parse_grid,
    parse_severity_spec,
    read_count_file,
    read_severity_csv,
    write_counts,
)
from ptex.errors import DataError
from ptex.risk import DiscreteSeverity, Erlang2Severity, ExponentialSeverity


def test_embedded_seizure():
    data = embedded_dataset("seizure")
    assert data.n == 351
    assert data.pairs()[0] == (0, 126)
    with pytest.raises(DataError, match="seizure"):
        embedded_dataset("nmes")


def test_pairs_with_header(tmp_path):
    path = tmp_path / "pairs.csv"
    path.write_text("value,frequency\n0,3\n\n2,1\n1,0\n")
    data = read_count_file(path)
    assert data.pairs() == [(0, 3), (1, 0), (2, 1)]
    assert data.n == 4


def test_raw_counts(tmp_path):
    path = tmp_path / "raw.txt"
    write_counts(path, np.array([2, 0, 0, 5]))
    data = load_counts(str(path))
    assert data.pairs() == [(0, 2), (2, 1), (5, 1)]
    assert data.name == "raw"


@pytest.mark.parametrize(
    "text, line",
    [("0,3\n1,-2\n", 2), ("count\n1\n2.5\n", 3), ("0,1,2\n", 1)],
)
def test_bad_rows(tmp_path, text, line):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(DataError) as excinfo:
        read_count_file(path)
    assert excinfo.value.line == line


def test_missing_and_empty(tmp_path):
    with pytest.raises(DataError, match="not found"):
        read_count_file(tmp_path / "absent.csv")
    (tmp_path / "blank.csv").write_text("\n\n")
    with pytest.raises(DataError, match="empty"):
        read_count_file(tmp_path / "blank.csv")
    (tmp_path / "zeros.csv").write_text("0,0\n1,0\n")
    with pytest.raises(DataError, match="zero"):
        read_count_file(tmp_path / "zeros.csv")


def test_severity_csv(tmp_path):
    path = tmp_path / "claims.csv"
    path.write_text("size,probability\n1,0.25\n3,0.75\n")
    sev = read_severity_csv(path)
    assert sev.probs.tolist() == [0.0, 0.25, 0.0, 0.75]
    path.write_text("1,0.5\n2,-0.5\n3,1.0\n")
    with pytest.raises(DataError) as excinfo:
        read_severity_csv(path)
    assert excinfo.value.line == 2


def test_parse_severity_spec(tmp_path):
    assert parse_severity_spec("exp:2") == ExponentialSeverity(2.0)
    assert parse_severity_spec("Erlang2:0.5") == Erlang2Severity(0.5)
    (tmp_path / "h.csv").write_text("1,1\n")
    assert isinstance(parse_severity_spec(f"discrete:{tmp_path / 'h.csv'}"), DiscreteSeverity)
    for bad in ("exp", "exp:", "pareto:1", "exp:fast"):
        with pytest.raises(ValueError):
            parse_severity_spec(bad)


def test_parse_grid():
    np.testing.assert_allclose(parse_grid("0:1:0.25"), [0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(parse_grid("2:2:1"), [2.0])
    for bad in ("0:1", "1:0:0.1", "0:1:0", "-1:1:1", "a:b:c", "0:1e9:1e-6"):
        with pytest.raises(ValueError):
            parse_grid(bad)
