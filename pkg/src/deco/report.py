"""Deterministic JSON and CSV reports."""

from __future__ import annotations

import io
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import IoError


@dataclass
class Report:
    command: str
    inputs_digest: str
    outputs: dict
    tool_version: str = __version__
    wall_time: float | None = None
    # CSV view: column names and rows; every command defines one
    columns: list[str] = field(default_factory=list)
    rows: list[list] = field(default_factory=list)


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return "%.17g" % x


def _scalar(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    raise TypeError(type(v))


def _json(value, out: io.StringIO, indent: int) -> None:
    pad = "  " * (indent + 1)
    if value is None:
        out.write("null")
    elif isinstance(value, str):
        out.write('"' + value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"')
    elif isinstance(value, dict):
        if not value:
            out.write("{}")
            return
        out.write("{\n")
        for i, (k, v) in enumerate(value.items()):
            out.write(f'{pad}"{k}": ')
            _json(v, out, indent + 1)
            out.write(",\n" if i < len(value) - 1 else "\n")
        out.write("  " * indent + "}")
    elif isinstance(value, (list, tuple, np.ndarray)):
        items = list(value)
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in items):
            out.write("[" + ", ".join(_scalar_or_str(v) for v in items) + "]")
            return
        out.write("[\n")
        for i, v in enumerate(items):
            out.write(pad)
            _json(v, out, indent + 1)
            out.write(",\n" if i < len(items) - 1 else "\n")
        out.write("  " * indent + "]")
    else:
        out.write(_scalar(value))


def _scalar_or_str(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, str):
        buf = io.StringIO()
        _json(v, buf, 0)
        return buf.getvalue()
    return _scalar(v)


def render_json(report: Report) -> str:
    doc = {
        "command": report.command,
        "inputs_digest": report.inputs_digest,
        "tool_version": report.tool_version,
        "wall_time": report.wall_time,
        "outputs": report.outputs,
    }
    buf = io.StringIO()
    _json(doc, buf, 0)
    buf.write("\n")
    return buf.getvalue()


def _csv_cell(v) -> str:
    if isinstance(v, str):
        return v
    if v is None:
        return ""
    if isinstance(v, (list, tuple)):
        return " ".join(_csv_cell(x) for x in v)
    return _scalar(v)


def render_csv(report: Report) -> str:
    lines = [",".join(report.columns)]
    lines += [",".join(_csv_cell(v) for v in row) for row in report.rows]
    return "\n".join(lines) + "\n"


def emit_report(report: Report, fmt: str = "json", out_path: str | Path | None = None) -> None:
    """Write ``report`` as JSON or CSV to ``out_path`` (stdout when None)."""
    if fmt == "json":
        text = render_json(report)
    elif fmt == "csv":
        text = render_csv(report)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if out_path is None or str(out_path) == "-":
        sys.stdout.write(text)
        return
    try:
        Path(out_path).write_text(text)
    except OSError as exc:
        raise IoError(f"cannot write {out_path}: {exc.strerror or exc}") from exc
