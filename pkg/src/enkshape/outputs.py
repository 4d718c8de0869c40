"""CSV serialisation of landmark sets, misfit traces and geodesic paths.

Floats are written with ``repr``, the shortest representation that reparses
to the identical IEEE-754 double, so every round-trip is lossless.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .shooting import GeodesicPath
from .validation import as_landmarks

__all__ = [
    "write_landmarks",
    "read_landmarks",
    "write_misfit_trace",
    "read_misfit_trace",
    "write_geodesic_path",
]


def _fmt(value) -> str:
    return repr(float(value))


def write_landmarks(path, points) -> Path:
    """Write one landmark configuration as CSV.

    Header is ``x0,...,x{d-1}``; one landmark per row.
    """
    pts = as_landmarks(points, "points")
    path = Path(path)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([f"x{k}" for k in range(pts.shape[1])])
        for row in pts:
            writer.writerow([_fmt(v) for v in row])
    return path


def read_landmarks(path) -> np.ndarray:
    """Read a landmark CSV written by :func:`write_landmarks`.

    Returns an ``(M, d)`` float array; raises ``ValueError`` on a malformed
    header or ragged rows.
    """
    path = Path(path)
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != [f"x{k}" for k in range(len(header))]:
            raise ValueError(f"{path}: expected landmark CSV header 'x0,...,x{{d-1}}', got {header}")
        rows = [[float(cell) for cell in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no landmarks in file")
    arr = np.asarray(rows, dtype=float)
    if arr.shape[1] != len(header):
        raise ValueError(f"{path}: row width {arr.shape[1]} does not match header {len(header)}")
    return as_landmarks(arr, str(path))


def write_misfit_trace(path, misfits) -> Path:
    """Write per-iteration squared misfits as two-column CSV (k, misfit)."""
    values = np.asarray(misfits, dtype=float)
    path = Path(path)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["k", "misfit"])
        for k, value in enumerate(values):
            writer.writerow([k, _fmt(value)])
    return path


def read_misfit_trace(path) -> np.ndarray:
    """Read a misfit CSV written by :func:`write_misfit_trace`."""
    path = Path(path)
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["k", "misfit"]:
            raise ValueError(f"{path}: expected header 'k,misfit', got {header}")
        values = [float(row[1]) for row in reader if row]
    return np.asarray(values, dtype=float)


def write_geodesic_path(path, geodesic: GeodesicPath) -> Path:
    """Write a shot trajectory as CSV, one row per time node.

    Columns: ``t``, then ``q{i}_{a}`` for landmark i and coordinate a, then
    ``p{i}_{a}`` likewise, then ``energy``.
    """
    path = Path(path)
    n_nodes, n_landmarks, dim = geodesic.positions.shape
    header = ["t"]
    header += [f"q{i}_{a}" for i in range(n_landmarks) for a in range(dim)]
    header += [f"p{i}_{a}" for i in range(n_landmarks) for a in range(dim)]
    header += ["energy"]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for k in range(n_nodes):
            row = [_fmt(geodesic.times[k])]
            row += [_fmt(v) for v in geodesic.positions[k].reshape(-1)]
            row += [_fmt(v) for v in geodesic.momenta[k].reshape(-1)]
            row.append(_fmt(geodesic.energies[k]))
            writer.writerow(row)
    return path
