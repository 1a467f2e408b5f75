"""Uniform report rows and their CSV / text rendering."""

from __future__ import annotations

import csv
import io
import math
from typing import NamedTuple

import numpy as np

COLUMNS = ("experiment", "parameter", "value", "expected", "error", "pass")


class Row(NamedTuple):
    experiment: str
    parameter: str
    value: object = None
    expected: object = None
    error: object = None
    passed: object = None


def fmt(x) -> str:
    """12 significant digits for reals, plain text otherwise, empty for None."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, complex):
        if x.imag == 0:
            return fmt(x.real)
        return f"{format(x.real, '.12g')}{format(x.imag, '+.12g')}j"
    if isinstance(x, float) or type(x).__module__ == "numpy":
        x = complex(x) if "complex" in type(x).__name__ else float(x)
        if isinstance(x, complex):
            return fmt(x)
        if math.isnan(x):
            return "nan"
        return format(x, ".12g")
    return str(x)


def to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def to_text(rows) -> str:
    cells = [COLUMNS] + [tuple(fmt(v) for v in r) for r in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(len(COLUMNS))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(line, widths)).rstrip() for line in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def all_passed(rows) -> bool:
    return all(r.passed is not False for r in rows)
