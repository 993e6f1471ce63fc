"""Deterministic report writers.

Reports must be byte-identical across runs on identical inputs: key order
is fixed by the producing dict, floats go through repr (shortest
round-trip), CSV uses a fixed column order and "\n" line endings.
"""
from __future__ import annotations

import csv
import io
import json


def dump_json(data: dict) -> str:
    return json.dumps(data, indent=2) + "\n"


def write_json(path: str, data: dict) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(dump_json(data))


def rows_to_csv(rows: list, columns: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(col)) for col in columns])
    return buf.getvalue()


def write_csv(path: str, rows: list, columns: list) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows, columns))


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value
