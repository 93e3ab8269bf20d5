"""CSV helpers shared by the exporters."""

import csv
import math


def format_float(x) -> str:
    """17 significant digits; round-trips every double."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, int)) or (hasattr(v, "dtype") and v.dtype.kind in "iub"):
        return str(int(v))
    return format_float(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_cell(v) for v in row])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
