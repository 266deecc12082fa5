"""CSV files with ``#`` metadata lines ahead of the header row.

Floats are written with ``repr`` (shortest string that parses back to the same
double) so a file read back reproduces the in-memory series exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


class CsvFormatError(ValueError):
    def __init__(self, path, lineno: int, message: str):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


def _fmt(v: float) -> str:
    return repr(float(v))


def write_series(path, times, columns: dict, meta: dict | None = None) -> Path:
    """Write ``t`` followed by the given columns (name -> 1-D array)."""
    path = Path(path)
    times = np.asarray(times, dtype=float)
    names = list(columns)
    data = [np.asarray(columns[n], dtype=float) for n in names]
    for n, col in zip(names, data):
        if col.shape != times.shape:
            raise ValueError(f"column {n} has {col.size} rows, expected {times.size}")
    lines = [f"# {k}: {v}" for k, v in (meta or {}).items()]
    lines.append(",".join(["t"] + names))
    for i, t in enumerate(times):
        lines.append(",".join([_fmt(t)] + [_fmt(col[i]) for col in data]))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_series(path) -> tuple[np.ndarray, dict, dict]:
    """Return (times, columns, metadata) from a file written by :func:`write_series`."""
    path = Path(path)
    meta: dict = {}
    header = None
    rows = []
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if header is not None:
                raise CsvFormatError(path, lineno, "metadata line after the header")
            key, sep, val = line[1:].partition(":")
            if sep:
                meta[key.strip()] = val.strip()
            continue
        cells = [c.strip() for c in line.split(",")]
        if header is None:
            if not cells or cells[0] != "t":
                raise CsvFormatError(path, lineno, f"header must start with 't', got {line!r}")
            header = cells
            continue
        if len(cells) != len(header):
            raise CsvFormatError(path, lineno, f"expected {len(header)} fields, got {len(cells)}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            raise CsvFormatError(path, lineno, f"non-numeric field in {line!r}") from None
    if header is None:
        raise CsvFormatError(path, 0, "missing header row")
    arr = np.array(rows, dtype=float).reshape(-1, len(header))
    return arr[:, 0], {name: arr[:, j] for j, name in enumerate(header[1:], 1)}, meta
