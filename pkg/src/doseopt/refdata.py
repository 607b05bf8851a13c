"""Loader for the embedded published reference tables.

The CSV files under ``data/`` carry the reference values that the
``reproduce`` command regenerates and diffs against; comment lines starting
with '#' describe each table's provenance and setting.
"""

from __future__ import annotations

import csv
from importlib import resources

__all__ = ["load_table"]


def load_table(table: int) -> list[dict]:
    """Rows of a reference table as dicts of floats (blank cells become None)."""
    if table not in (1, 2, 3, 4, 5, 6):
        raise ValueError(f"table must be 1..6, got {table}")
    path = resources.files("doseopt.data").joinpath(f"table{table}.csv")
    with path.open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = []
    for row in csv.DictReader(lines):
        parsed = {}
        for key, val in row.items():
            if val is None or val == "":
                parsed[key] = None
            else:
                try:
                    parsed[key] = float(val)
                except ValueError:
                    parsed[key] = val
        rows.append(parsed)
    return rows
