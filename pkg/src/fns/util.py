"""Small shared helpers: locale-independent CSV emission."""

from __future__ import annotations

import csv


def fmt(x) -> str:
    """17-significant-digit, locale-independent numeric formatting."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(path, header, rows) -> None:
    """Rows of scalars; every file gets a header row."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        rows = list(r)
    if not rows:
        raise ValueError(f"{path}: empty CSV (missing header)")
    return rows[0], rows[1:]
