"""CSV helpers: header row, one row per point, 6 significant digits, no exponents."""

from __future__ import annotations

import csv
import io
from typing import Iterable, Sequence

import numpy as np


def fmt6(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if v != v:
        return "nan"
    return np.format_float_positional(v, precision=6, unique=False, fractional=False, trim="-")


def to_csv(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt6(v) for v in row])
    return buf.getvalue()
