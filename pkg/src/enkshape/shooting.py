"""Hamiltonian landmark dynamics and geodesic shooting.

A configuration of M landmarks ``q`` (shape ``(M, d)``) carries conjugate
momenta ``p`` of the same shape.  The momenta induce a velocity field

    u(x) = sum_i K(q_i, x) p_i,

and the coupled evolution is

    dq_j/dt = sum_i K(q_i, q_j) p_i
    dp_j/dt = sum_i (p_i . p_j) (q_j - q_i) / tau^2 * K(q_i, q_j),

the canonical equations of H(q, p) = 1/2 sum_ij (p_i . p_j) K(q_i, q_j)
specialised to the Gaussian kernel.  Time is integrated on the uniform grid
t = 0, 1/T, ..., 1 with explicit forward Euler: both ``q`` and ``p`` advance
simultaneously from the step-start state.

Kernel sums are evaluated with fixed-order reductions, so integration is
bit-reproducible for identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import kernel_cross, kernel_matrix
from .validation import as_landmarks, as_matching_pair, check_steps, check_width

__all__ = [
    "BlowUpError",
    "GeodesicPath",
    "velocity",
    "hamiltonian_rhs",
    "shoot",
    "forward",
    "path_energy",
    "transport",
]


class BlowUpError(RuntimeError):
    """Integration produced a non-finite state.

    Raised instead of letting NaN/inf propagate into downstream statistics.
    ``step``, ``member`` and ``iteration`` locate the failure when known.
    """

    def __init__(self, message: str, step: int | None = None,
                 member: int | None = None, iteration: int | None = None):
        super().__init__(message)
        self.step = step
        self.member = member
        self.iteration = iteration


@dataclass(frozen=True)
class GeodesicPath:
    """Discrete trajectory of one shot: T+1 nodes on the unit time interval.

    Attributes
    ----------
    times : ndarray, shape (T+1,)
        Node times 0, 1/T, ..., 1.
    positions, momenta : ndarray, shape (T+1, M, d)
        Landmark positions and conjugate momenta at each node;
        ``positions[0]``/``momenta[0]`` are the supplied initial condition.
    energies : ndarray, shape (T+1,)
        Squared velocity-field norm ``|u_t|^2`` at each node.
    """

    times: np.ndarray
    positions: np.ndarray
    momenta: np.ndarray
    energies: np.ndarray

    @property
    def endpoint(self) -> np.ndarray:
        """Landmark positions at t = 1."""
        return self.positions[-1]

    @property
    def steps(self) -> int:
        return len(self.times) - 1


def velocity(positions, momenta, targets, tau: float) -> np.ndarray:
    """Evaluate the momentum-induced velocity field at arbitrary points.

    ``u(x) = sum_i K(positions[i], x) momenta[i]``, evaluated for each row of
    ``targets``.  Linear in ``momenta``.

    Returns
    -------
    ndarray, shape (M', d)
    """
    q, p = as_matching_pair(positions, momenta)
    tgt = as_landmarks(targets, "targets")
    if tgt.shape[1] != q.shape[1]:
        raise ValueError(
            f"targets dimension {tgt.shape[1]} does not match landmarks dimension {q.shape[1]}"
        )
    cross = kernel_cross(q, tgt, tau)
    return cross.T @ p


def _flow_parts(q: np.ndarray, p: np.ndarray, tau: float):
    """One fused evaluation at a state: RHS pair plus the Gram/momentum
    products, so integrators build the kernel matrix once per step."""
    diff = q[None, :, :] - q[:, None, :]  # diff[i, j] = q_j - q_i
    sq_dist = np.einsum("ijk,ijk->ij", diff, diff)
    gram = np.exp(-sq_dist / (2.0 * tau * tau))
    pp = p @ p.T
    dq = gram @ p
    dp = np.einsum("ij,ijd->jd", pp * gram / (tau * tau), diff)
    return dq, dp, gram, pp


def hamiltonian_rhs(positions, momenta, tau: float):
    """Right-hand side of the coupled landmark equations.

    Returns
    -------
    (dq, dp) : pair of ndarray, shape (M, d)
        ``dq[j] = sum_i K_ij p_i`` and
        ``dp[j] = sum_i (p_i . p_j)(q_j - q_i)/tau^2 * K_ij``.

    ``dp`` sums to zero over landmarks (to rounding): the pairwise terms are
    antisymmetric, so total momentum is conserved.
    """
    q, p = as_matching_pair(positions, momenta)
    tau = check_width(tau)
    dq, dp, _, _ = _flow_parts(q, p, tau)
    return dq, dp


def path_energy(positions, momenta, tau: float) -> float:
    """Squared RKHS norm of the velocity field carried by one state.

    ``|u|^2 = sum_ij (p_i . p_j) K(q_i, q_j)``; non-negative because the
    kernel is positive semi-definite.
    """
    q, p = as_matching_pair(positions, momenta)
    gram = kernel_matrix(q, tau)
    return float(np.sum((p @ p.T) * gram))


def shoot(template, momentum, steps: int, tau: float) -> GeodesicPath:
    """Integrate the landmark equations from ``(template, momentum)`` to t = 1.

    Explicit forward Euler with T = ``steps`` uniform increments; both
    positions and momenta are advanced from the step-start state.

    Raises
    ------
    BlowUpError
        If any coordinate becomes non-finite, naming the offending step.
    """
    q0, p0 = as_matching_pair(template, momentum, "template", "momentum")
    steps = check_steps(steps)
    tau = check_width(tau)
    dt = 1.0 / steps

    n_landmarks, dim = q0.shape
    positions = np.empty((steps + 1, n_landmarks, dim))
    momenta = np.empty_like(positions)
    energies = np.empty(steps + 1)
    positions[0] = q0
    momenta[0] = p0

    for k in range(steps):
        dq, dp, gram, pp = _flow_parts(positions[k], momenta[k], tau)
        energies[k] = float(np.sum(pp * gram))
        positions[k + 1] = positions[k] + dt * dq
        momenta[k + 1] = momenta[k] + dt * dp
        if not (np.all(np.isfinite(positions[k + 1])) and np.all(np.isfinite(momenta[k + 1]))):
            raise BlowUpError(
                f"integration blew up at step {k + 1} of {steps} (non-finite state)",
                step=k + 1,
            )
    energies[steps] = path_energy(positions[steps], momenta[steps], tau)

    times = np.arange(steps + 1) * dt
    times[-1] = 1.0
    return GeodesicPath(times=times, positions=positions, momenta=momenta, energies=energies)


def forward(template, momentum, steps: int, tau: float) -> np.ndarray:
    """Landmark positions at t = 1 under the shot geodesic.

    Endpoint extraction of :func:`shoot` (a lean loop with identical
    arithmetic, skipping path storage); identical error contract.
    """
    q, p = as_matching_pair(template, momentum, "template", "momentum")
    steps = check_steps(steps)
    tau = check_width(tau)
    dt = 1.0 / steps
    for k in range(steps):
        dq, dp, _, _ = _flow_parts(q, p, tau)
        q = q + dt * dq
        p = p + dt * dp
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise BlowUpError(
                f"integration blew up at step {k + 1} of {steps} (non-finite state)",
                step=k + 1,
            )
    return q


def transport(path: GeodesicPath, points, tau: float) -> np.ndarray:
    """Advect arbitrary points through the flow recorded in ``path``.

    Each point follows ``x <- x + dt * u_t(x)`` with the velocity field
    induced by the stored ``(positions, momenta)`` nodes, i.e. the same Euler
    discretisation that produced the path.  Landmarks themselves, transported
    this way, reproduce ``path.endpoint``.

    Returns
    -------
    ndarray, shape (M', d)
        Final positions of the supplied points at t = 1.
    """
    pts = as_landmarks(points, "points")
    tau = check_width(tau)
    if pts.shape[1] != path.positions.shape[2]:
        raise ValueError(
            f"points dimension {pts.shape[1]} does not match path dimension "
            f"{path.positions.shape[2]}"
        )
    dt = 1.0 / path.steps
    current = pts.copy()
    for k in range(path.steps):
        current = current + dt * velocity(path.positions[k], path.momenta[k], current, tau)
        if not np.all(np.isfinite(current)):
            raise BlowUpError(
                f"point transport blew up at step {k + 1} of {path.steps}",
                step=k + 1,
            )
    return current
