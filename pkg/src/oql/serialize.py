"""Canonical text formatting helpers: numbers, dates, JSON.

Byte-stable output is a contract of this package (same input, same bytes),
so every number that reaches a file or stdout goes through one formatter.
"""

import datetime as _dt
import json
import math


def format_number(x: float) -> str:
    """Shortest round-trip decimal; integral values drop the decimal point.

    300.0 -> "300", 0.2 -> "0.2", -0.345 -> "-0.345".
    """
    f = float(x)
    if not math.isfinite(f):
        raise ValueError(f"non-finite number has no canonical text form: {f!r}")
    if f == int(f) and abs(f) < 1e16:
        return str(int(f))
    return repr(f)


def parse_date(text: str) -> _dt.date:
    return _dt.date.fromisoformat(text.strip())


def format_date(d: _dt.date) -> str:
    return d.isoformat()


def dumps(obj) -> str:
    """Canonical JSON: two-space indent, insertion key order, trailing newline."""
    return json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False) + "\n"
