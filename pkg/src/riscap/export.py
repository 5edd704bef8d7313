"""CSV / JSON serialization of tables, figures, traces and RIS phases."""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from .experiments import FigureData, TableData

__all__ = ["fmt4", "table_csv", "table_json", "figure_csv", "figure_json",
           "phases_csv", "trace_csv", "dumps"]


def fmt4(value) -> str:
    """Fixed 4-decimal rendering; lists become ``[a, b, ...]``."""
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(fmt4(v) for v in value) + "]"
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"{float(value):.4f}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def table_csv(table: TableData) -> str:
    return _csv(table.columns, [[fmt4(row[c]) for c in table.columns] for row in table.rows])


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def dumps(doc) -> str:
    return json.dumps(_plain(doc), indent=2) + "\n"


def table_json(table: TableData) -> str:
    return dumps({"table": table.name, "columns": table.columns, "rows": table.rows,
                  "meta": table.meta})


def figure_csv(fig: FigureData) -> str:
    return _csv(fig.columns, [[repr(v) if isinstance(v, float) else v for v in row]
                              for row in _plain(fig.rows)])


def figure_json(fig: FigureData) -> str:
    return dumps({"figure": fig.name, "columns": fig.columns, "rows": fig.rows,
                  "meta": fig.meta})


def phases_csv(element_phases) -> str:
    """``element,phase_rad`` rows for RIS hardware configuration."""
    return _csv(["element", "phase_rad"],
                [[i, repr(float(p))] for i, p in enumerate(element_phases)])


def trace_csv(result) -> str:
    """Per-iteration ``q`` and ``r`` iterates of an allocation result."""
    n_q = len(result.trace_q[0]) if result.trace_q else 0
    n_r = len(result.trace_r[0]) if result.trace_r else 0
    header = ["iteration"] + [f"q{i + 1}" for i in range(n_q)] + [f"r{i + 1}" for i in range(n_r)]
    rows = [[i] + [repr(float(x)) for x in q] + [repr(float(x)) for x in r]
            for i, (q, r) in enumerate(zip(result.trace_q, result.trace_r))]
    return _csv(header, rows)
