"""Input validation helpers shared across the package.

All public entry points funnel array-like inputs through these functions so
that shape and finiteness errors surface as ``ValueError`` with a usable
message instead of propagating NaNs into the filter.
"""

from __future__ import annotations

import numpy as np


def as_point(x, name: str = "point") -> np.ndarray:
    """Coerce ``x`` to a finite float64 vector of shape (d,)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise ValueError(f"{name} must be a 1-d coordinate vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return arr


def as_landmarks(a, name: str = "landmarks") -> np.ndarray:
    """Coerce ``a`` to a finite float64 array of shape (M, d), M >= 1."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(
            f"{name} must be a 2-d array of shape (n_landmarks, dim), got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return arr


def as_matching_pair(a, b, a_name: str = "positions", b_name: str = "momenta"):
    """Validate two landmark-shaped arrays of identical shape."""
    first = as_landmarks(a, a_name)
    second = as_landmarks(b, b_name)
    if first.shape != second.shape:
        raise ValueError(
            f"{a_name} and {b_name} must have the same shape, "
            f"got {first.shape} and {second.shape}"
        )
    return first, second


def as_ensemble(members, name: str = "ensemble") -> np.ndarray:
    """Coerce to a finite float64 array of shape (n_members, M, d), n_members >= 2."""
    arr = np.asarray(members, dtype=float)
    if arr.ndim != 3:
        raise ValueError(
            f"{name} must be a 3-d array of shape (n_members, n_landmarks, dim), "
            f"got shape {arr.shape}"
        )
    if arr.shape[0] < 2:
        raise ValueError(f"{name} needs at least 2 members for sample statistics")
    if arr.shape[1] < 1 or arr.shape[2] < 1:
        raise ValueError(f"{name} has an empty landmark configuration: shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_width(tau, name: str = "tau") -> float:
    """Validate a kernel width: strictly positive finite scalar."""
    value = float(tau)
    if not np.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be a positive finite number, got {tau!r}")
    return value


def check_steps(steps, name: str = "steps") -> int:
    """Validate a time-step count: integer >= 1."""
    count = int(steps)
    if count != steps or count < 1:
        raise ValueError(f"{name} must be a positive integer, got {steps!r}")
    return count
