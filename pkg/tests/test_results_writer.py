"""Tests for CSV/JSON output."""

import json

import pandas as pd
import pytest

from services.errors import ResultsIoError
from services.experiments import RateRecord
from services.results_writer import RATE_COLUMNS, emit_results


def _record(eps=0.1, sup=0.25):
    return RateRecord(config_id="t", d=1, p=2, n=1, m=1, s=5.0, tau=1.0, eps=eps, sup_error=sup,
                      argmax_k=(0.125,), cutoff=37.7, wall_ms=0.0, points=40)


def test_empty_records(tmp_path):
    out = tmp_path / "out"
    with pytest.raises(ResultsIoError):
        emit_results([], out, "rates")
    assert not out.exists()


def test_single_record(tmp_path):
    csv_path, json_path = emit_results([_record()], tmp_path, "rates", {"slope": float("nan")})
    lines = csv_path.read_text().splitlines()
    assert len(lines) == 2
    assert lines[0].split(",") == RATE_COLUMNS + ["argmax_k0", "cutoff", "wall_ms"]
    frame = pd.read_csv(csv_path)
    assert frame.loc[0, "sup_error"] == 0.25

    summary = json.loads(json_path.read_text())
    assert summary["slope"] is None
    assert "numpy" in summary["versions"]


def test_reruns_are_byte_identical(tmp_path):
    records = [_record(0.1, 1.0 / 3.0), _record(0.05, 2.0 / 7.0)]
    first = emit_results(records, tmp_path / "a", "rates", {"fits": [{"slope": 1.0}]})
    second = emit_results(records, tmp_path / "b", "rates", {"fits": [{"slope": 1.0}]})
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()
