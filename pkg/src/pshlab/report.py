"""Verdict reports with JSON and CSV serialisation."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "SCHEMA_VERSION",
    "VERDICTS",
    "ReportError",
    "Check",
    "Report",
    "to_json",
    "from_json",
    "to_csv",
    "from_csv",
    "emit",
    "fmt_number",
    "plain",
]

SCHEMA_VERSION = "1.0"
VERDICTS = ("pass", "fail", "inconclusive")


class ReportError(Exception):
    pass


def fmt_number(x) -> str:
    """12 significant digits; ``inf``, ``-inf`` and ``nan`` spelled out."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"


def plain(v):
    """JSON-safe copy: numpy scalars and arrays become Python numbers and lists."""
    if isinstance(v, dict):
        return {str(k): plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [plain(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": plain(v.real), "im": plain(v.imag)}
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v) or math.isinf(v):
            return fmt_number(v)
        return v
    return v


@dataclass
class Check:
    id: str
    name: str
    verdict: str
    locator: Optional[str] = None
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ReportError(f"bad verdict {self.verdict!r}")
        if self.verdict == "fail" and not self.locator:
            raise ReportError(f"check {self.id} failed without a locator")
        self.payload = plain(self.payload)


@dataclass
class Report:
    kind: str
    checks: list = field(default_factory=list)
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        self.rows = [[plain(x) for x in r] for r in self.rows]
        self.provenance = plain(self.provenance)

    def add(self, *args, **kw) -> Check:
        c = Check(*args, **kw)
        self.checks.append(c)
        return c

    @property
    def verdict(self) -> str:
        vs = [c.verdict for c in self.checks]
        if "fail" in vs:
            return "fail"
        if "inconclusive" in vs:
            return "inconclusive"
        return "pass"

    def exit_code(self) -> int:
        return {"pass": 0, "fail": 1, "inconclusive": 3}[self.verdict]


def to_json(report: Report) -> str:
    d = plain(asdict(report))
    order = ["schema_version", "kind", "provenance", "checks", "columns", "rows"]
    return json.dumps({k: d[k] for k in order}, indent=2, allow_nan=False) + "\n"


def from_json(text: str) -> Report:
    d = json.loads(text)
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ReportError(f"unsupported schema version {d.get('schema_version')!r}")
    checks = [Check(**c) for c in d["checks"]]
    return Report(d["kind"], checks, d["columns"], d["rows"], d["provenance"],
                  d["schema_version"])


def _cell(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, float)):
        return fmt_number(x)
    if x is None:
        return ""
    if isinstance(x, (dict, list)):
        return json.dumps(x, sort_keys=True)
    return str(x)


def to_csv(report: Report) -> str:
    """The data table if the report has one, else one row per check."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if report.columns:
        w.writerow(report.columns)
        for r in report.rows:
            w.writerow([_cell(x) for x in r])
    else:
        w.writerow(["id", "name", "verdict", "locator", "payload"])
        for c in report.checks:
            w.writerow([c.id, c.name, c.verdict, c.locator or "", json.dumps(c.payload, sort_keys=True)])
    return buf.getvalue()


def _parse_cell(s):
    try:
        return float(s)
    except ValueError:
        return s


def from_csv(text: str):
    """``(columns, rows)`` with numeric cells parsed back to floats."""
    rd = list(csv.reader(io.StringIO(text)))
    return rd[0], [[_parse_cell(s) for s in r] for r in rd[1:]]


def emit(report: Report, out_dir, fmt="json") -> list:
    """Write ``<kind>.json`` or ``<kind>.csv`` (plus ``<kind>-checks.csv``) under ``out_dir``."""
    if fmt not in ("json", "csv"):
        raise ReportError(f"unknown format {fmt!r}")
    try:
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        if fmt == "json":
            p = os.path.join(out_dir, f"{report.kind}.json")
            with open(p, "w") as fh:
                fh.write(to_json(report))
            paths.append(p)
        else:
            p = os.path.join(out_dir, f"{report.kind}.csv")
            with open(p, "w") as fh:
                fh.write(to_csv(report))
            paths.append(p)
            if report.columns:
                q = os.path.join(out_dir, f"{report.kind}-checks.csv")
                with open(q, "w") as fh:
                    fh.write(to_csv(Report(report.kind, report.checks)))
                paths.append(q)
        return paths
    except OSError as e:
        raise ReportError(f"cannot write report: {e}") from e
