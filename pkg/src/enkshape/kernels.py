"""Gaussian reproducing-kernel evaluation over landmark configurations.

The kernel is the isotropic Gaussian

    K(x, y) = exp(-|x - y|^2 / (2 tau^2)),

acting as a scalar on each coordinate of the attached momentum vectors.
``tau`` controls how far apart two landmarks can be while still interacting.

Squared distances are formed from explicit coordinate differences (never the
expanded ``|x|^2 + |y|^2 - 2 x.y`` form), so Gram matrices are exactly
symmetric with an exact unit diagonal.
"""

from __future__ import annotations

import numpy as np

from .validation import as_landmarks, as_point, check_width

__all__ = ["kernel_value", "kernel_gradient", "kernel_matrix", "kernel_cross"]


def kernel_value(x, y, tau: float) -> float:
    """Evaluate the Gaussian kernel at a pair of points.

    Parameters
    ----------
    x, y : array_like, shape (d,)
        Finite coordinate vectors.
    tau : float
        Kernel width, > 0.

    Returns
    -------
    float
        Value in (0, 1]; equals 1 exactly when ``x == y``.
    """
    x = as_point(x, "x")
    y = as_point(y, "y")
    tau = check_width(tau)
    if x.shape != y.shape:
        raise ValueError(f"x and y must have the same dimension, got {x.shape} and {y.shape}")
    delta = x - y
    return float(np.exp(-np.dot(delta, delta) / (2.0 * tau * tau)))


def kernel_gradient(x, y, tau: float) -> np.ndarray:
    """Gradient of :func:`kernel_value` with respect to its first argument.

    Closed form: ``-((x - y) / tau^2) * K(x, y)``.  Antisymmetric under
    swapping ``x`` and ``y``; zero at coincidence.
    """
    x = as_point(x, "x")
    y = as_point(y, "y")
    tau = check_width(tau)
    if x.shape != y.shape:
        raise ValueError(f"x and y must have the same dimension, got {x.shape} and {y.shape}")
    delta = x - y
    value = np.exp(-np.dot(delta, delta) / (2.0 * tau * tau))
    return -(delta / (tau * tau)) * value


def kernel_matrix(points, tau: float) -> np.ndarray:
    """Gram matrix of the Gaussian kernel over one landmark configuration.

    Parameters
    ----------
    points : array_like, shape (M, d)
        Landmark configuration, M >= 1.
    tau : float
        Kernel width, > 0.

    Returns
    -------
    ndarray, shape (M, M)
        Exactly symmetric, unit diagonal, entries in (0, 1]; positive
        semi-definite.
    """
    pts = as_landmarks(points, "points")
    tau = check_width(tau)
    diff = pts[:, None, :] - pts[None, :, :]
    sq_dist = np.einsum("ijk,ijk->ij", diff, diff)
    return np.exp(-sq_dist / (2.0 * tau * tau))


def kernel_cross(points, targets, tau: float) -> np.ndarray:
    """Cross-kernel matrix ``K[i, j] = K(points[i], targets[j])``.

    Used to evaluate the velocity field carried by ``points`` at arbitrary
    ``targets``; shape (M, M').
    """
    pts = as_landmarks(points, "points")
    tgt = as_landmarks(targets, "targets")
    tau = check_width(tau)
    if pts.shape[1] != tgt.shape[1]:
        raise ValueError(
            f"points and targets must share a dimension, got {pts.shape[1]} and {tgt.shape[1]}"
        )
    diff = pts[:, None, :] - tgt[None, :, :]
    sq_dist = np.einsum("ijk,ijk->ij", diff, diff)
    return np.exp(-sq_dist / (2.0 * tau * tau))
