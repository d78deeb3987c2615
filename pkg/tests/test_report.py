import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pshlab.pipelines import PIPELINES, resolve_config
from pshlab.report import (SCHEMA_VERSION, Check, Report, ReportError, emit, fmt_number,
                           from_csv, from_json, plain, to_csv, to_json)


def _run(command, name):
    cfg = resolve_config(command, {"catalog": name}, {})
    return PIPELINES[command](cfg)


@pytest.fixture(scope="module")
def reports():
    scan = _run("psh-scan", "hartogs")
    pre = _run("prekopa", "gaussian-prekopa")
    suite = Report("verify-all", provenance={"suite": "desk", "seed": 0})
    suite.add("AC99", "synthetic", "pass", None, {"value": np.float64(0.25), "z": 0.5 + 1j})
    suite.add("AC98", "synthetic failure", "fail", "x=0.55", {"values": np.arange(3)})
    return [scan, pre, suite]


def test_json_round_trip(reports):
    for rep in reports:
        text = to_json(rep)
        back = from_json(text)
        assert to_json(back) == text
        assert back.verdict == rep.verdict
        assert json.loads(text)["schema_version"] == SCHEMA_VERSION


def test_csv_round_trip(reports):
    for rep in reports:
        cols, rows = from_csv(to_csv(rep))
        if rep.columns:
            assert cols == rep.columns
            assert len(rows) == len(rep.rows)
            for r, s in zip(rep.rows, rows):
                for a, b in zip(r, s):
                    if isinstance(a, float) and math.isfinite(a):
                        assert b == pytest.approx(a, rel=1e-11)
        else:
            assert cols[:3] == ["id", "name", "verdict"]
            assert [r[2] for r in rows] == [c.verdict for c in rep.checks]


def test_fail_needs_locator():
    with pytest.raises(ReportError, match="locator"):
        Check("x", "y", "fail")
    with pytest.raises(ReportError):
        Check("x", "y", "maybe")


def test_verdict_and_exit_codes():
    r = Report("k")
    assert r.verdict == "pass" and r.exit_code() == 0
    r.add("a", "a", "inconclusive")
    assert r.exit_code() == 3
    r.add("b", "b", "fail", "t=0")
    assert r.verdict == "fail" and r.exit_code() == 1


def test_nonfinite_values():
    rep = Report("k", rows=[[math.inf, -math.inf, math.nan]], columns=["a", "b", "c"])
    text = to_json(rep)
    assert '"inf"' in text and '"-inf"' in text and '"nan"' in text
    assert to_csv(rep).splitlines()[1] == "inf,-inf,nan"
    assert fmt_number(1 / 3) == "0.333333333333"


def test_plain():
    assert plain({"a": np.int64(2), "b": (np.bool_(True), 1j)}) == {"a": 2, "b": [True, {"re": 0.0, "im": 1.0}]}


def test_emit(tmp_path, reports):
    scan = reports[0]
    paths = emit(scan, tmp_path, "csv")
    assert [p.rsplit("/", 1)[1] for p in paths] == ["psh-scan.csv", "psh-scan-checks.csv"]
    paths = emit(scan, tmp_path / "j", "json")
    assert from_json(open(paths[0]).read()).kind == "psh-scan"
    with pytest.raises(ReportError):
        emit(scan, tmp_path, "xml")


def test_bad_schema():
    with pytest.raises(ReportError, match="schema"):
        from_json(json.dumps({"schema_version": "0.1", "kind": "k", "checks": [], "columns": [],
                              "rows": [], "provenance": {}}))


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=6))
def test_csv_numbers_round_trip(xs):
    rep = Report("k", columns=[f"c{i}" for i in range(len(xs))], rows=[xs])
    _, rows = from_csv(to_csv(rep))
    for a, b in zip(xs, rows[0]):
        assert b == pytest.approx(a, rel=1e-11, abs=1e-300)
