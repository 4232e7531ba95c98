"""Verification report: records, canonical JSON, text summary and CSV plot data."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

STATUSES = ("pass", "fail", "informational", "skipped")


@dataclass
class CheckRecord:
    id: str
    anchor: str
    status: str
    margin: float | None = None
    witness: object = None
    detail: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"bad status {self.status!r}")


@dataclass
class VerificationReport:
    version: str
    backend: str
    config: dict
    checks: list
    tables: dict = field(default_factory=dict)   # name -> (header, rows); written as CSV only

    @property
    def summary(self):
        counts = {s: 0 for s in STATUSES}
        for c in self.checks:
            counts[c.status] += 1
        return counts

    @property
    def passed(self):
        return self.summary["fail"] == 0

    def get(self, check_id):
        for c in self.checks:
            if c.id == check_id:
                return c
        raise KeyError(check_id)

    def to_dict(self):
        # wall times vary run to run; they go to the text summary only
        checks = []
        for c in self.checks:
            d = asdict(c)
            d.pop("wall_time")
            checks.append(d)
        return {"version": self.version, "backend": self.backend, "summary": self.summary,
                "config": self.config, "checks": checks}


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    return x


def _encode(x, indent=0):
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(x, dict):
        if not x:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(x[k], indent + 1)}" for k in sorted(x)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(x, list):
        if not x:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in x):
            return "[" + ", ".join(_encode(v) for v in x) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent + 1) for v in x) + "\n" + end + "]"
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, float):
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return format(x, ".17g")
    return json.dumps(x)


def report_json(report):
    return _encode(_plain(report.to_dict())) + "\n"


def _decode_float(v):
    if v in ("nan", "inf", "-inf"):
        return float(v)
    return v


def load_report(text):
    data = json.loads(text)
    checks = []
    for c in data["checks"]:
        m = c["margin"]
        checks.append(CheckRecord(c["id"], c["anchor"], c["status"], _decode_float(m) if m is not None else None,
                                  c["witness"], c["detail"]))
    return VerificationReport(data["version"], data["backend"], data["config"], checks)


def report_text(report):
    lines = [f"folverify {report.version} ({report.backend})"]
    width = max((len(c.id) for c in report.checks), default=10)
    for c in report.checks:
        margin = "" if c.margin is None else f"  margin={c.margin:.3e}"
        lines.append(f"{c.status.upper():<13} {c.id:<{width}}  {c.anchor}{margin}  [{c.wall_time:.2f}s]")
        if c.status in ("fail", "skipped") and c.witness is not None:
            lines.append(f"{'':<13} witness: {json.dumps(_plain(c.witness))[:200]}")
    s = report.summary
    lines.append(f"summary: {s['pass']} pass, {s['fail']} fail, {s['informational']} informational, "
                 f"{s['skipped']} skipped")
    return "\n".join(lines) + "\n"


def write_tables(report, out):
    out = Path(out)
    written = []
    for name, (header, rows) in sorted(report.tables.items()):
        path = out / f"{name}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in _plain(list(row))])
        written.append(path)
    return written


def emit_report(report, out, fmt="json"):
    """Write the report in ``fmt`` plus CSV plot data into directory ``out``."""
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        if fmt == "json":
            p = out / "report.json"
            p.write_text(report_json(report))
            paths.append(p)
        elif fmt == "text":
            p = out / "report.txt"
            p.write_text(report_text(report))
            paths.append(p)
        elif fmt != "csv":
            raise ValueError(f"unknown format {fmt!r}")
        if fmt == "csv":
            p = out / "checks.csv"
            with p.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["id", "status", "margin", "anchor"])
                for c in report.checks:
                    w.writerow([c.id, c.status, "" if c.margin is None else format(c.margin, ".17g"), c.anchor])
            paths.append(p)
        paths += write_tables(report, out)
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    return paths
