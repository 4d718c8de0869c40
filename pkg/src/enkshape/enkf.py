"""Iterative ensemble Kalman inversion for landmark matching.

The unknown is the initial momentum attached to a template configuration.
An ensemble of candidate momenta is pushed through the forward geodesic map,
and each member is nudged by a shared, regularised Kalman gain built from the
ensemble's sample covariances:

    gain = Cov_PQ (Cov_QQ + xi I)^(-1)

applied to that member's own prediction residual.  The update keeps every
member inside the affine hull of the current ensemble, so the initial spread
decides the search space.

Conventions
-----------
* An ensemble is an ndarray of shape ``(n_members, M, d)``.
* Flattened covariances use landmark-major, coordinate-minor order: the
  C-order reshape of an ``(M, d)`` array, i.e.
  ``[q_0_0, ..., q_0_{d-1}, q_1_0, ...]``.
* The misfit weight on the observation space is the identity, so the recorded
  misfit is the squared Euclidean norm of ``target - mean_prediction``.
* Sample means and covariance sums run in fixed member order; results are
  bit-identical regardless of how many threads shoot the ensemble.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .shooting import BlowUpError, forward
from .validation import as_ensemble, as_landmarks, check_steps, check_width

__all__ = [
    "MatchConfig",
    "MisfitTrace",
    "MatchResult",
    "ensemble_mean",
    "ensemble_forward",
    "anomalies",
    "kalman_apply",
    "enkf_match",
]

PHASES = ("shoot", "stats", "solve", "update")


@dataclass(frozen=True)
class MatchConfig:
    """Parameters of one matching run.

    Defaults are the reference operating point: 50 Kalman iterations, 15 time
    steps, unit regularisation and kernel width, absolute tolerance 1e-5.
    """

    iterations: int = 50
    time_steps: int = 15
    xi: float = 1.0
    tau: float = 1.0
    tolerance: float = 1e-5

    def __post_init__(self):
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ValueError(f"iterations must be a positive integer, got {self.iterations!r}")
        check_steps(self.time_steps, "time_steps")
        check_width(self.tau, "tau")
        if not np.isfinite(self.xi) or self.xi < 0:
            raise ValueError(f"xi must be a non-negative finite number, got {self.xi!r}")
        if not np.isfinite(self.tolerance) or self.tolerance <= 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance!r}")


@dataclass(frozen=True)
class MisfitTrace:
    """Squared data misfits recorded at every visited iteration.

    ``values[k]`` is ``|target - mean_prediction|^2`` at iteration ``k``;
    the trace has ``iterations_run + 1`` entries, the final one belonging to
    the stopping iteration.
    """

    values: np.ndarray
    converged: bool
    iterations_run: int

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if len(self.values) != self.iterations_run + 1:
            raise ValueError(
                f"trace length {len(self.values)} does not match "
                f"iterations_run={self.iterations_run}"
            )


@dataclass(frozen=True)
class MatchResult:
    """Outcome of :func:`enkf_match`.

    Attributes
    ----------
    ensemble : ndarray, shape (n_members, M, d)
        Final momentum ensemble.
    mean_momentum : ndarray, shape (M, d)
        Member mean of the final ensemble.
    trace : MisfitTrace
    timings : dict
        Wall-clock seconds accumulated per phase (shoot / stats / solve /
        update).
    config : MatchConfig
    """

    ensemble: np.ndarray
    mean_momentum: np.ndarray
    trace: MisfitTrace
    timings: dict = field(default_factory=dict)
    config: MatchConfig = field(default_factory=MatchConfig)


def ensemble_mean(members) -> np.ndarray:
    """Componentwise mean over ensemble members, fixed member order."""
    arr = as_ensemble(members)
    return arr.mean(axis=0)


def _resolve_threads(threads) -> int:
    if threads in (0, None):
        return os.cpu_count() or 1
    count = int(threads)
    if count < 1:
        raise ValueError(f"threads must be >= 1, or 0/None for auto, got {threads!r}")
    return count


def ensemble_forward(members, template, time_steps: int, tau: float, threads: int = 1):
    """Push every member through the forward geodesic map.

    Shooting is embarrassingly parallel across members; with ``threads > 1``
    members are shot on a thread pool.  Results are written by member index,
    so the output is identical for any thread count.

    Parameters
    ----------
    members : ndarray, shape (n_members, M, d)
        Momentum ensemble.
    template : ndarray, shape (M, d)
        Start configuration shared by all members.
    time_steps, tau :
        Forward-map discretisation and kernel width.
    threads : int
        Worker threads; 1 runs serially, 0/None uses all cores.

    Returns
    -------
    (predictions, mean_prediction)
        Per-member endpoints, shape (n_members, M, d), and their componentwise
        mean, shape (M, d).

    Raises
    ------
    BlowUpError
        If any member's shoot diverges; the message names the member index.
    """
    ens = as_ensemble(members)
    q0 = as_landmarks(template, "template")
    if ens.shape[1:] != q0.shape:
        raise ValueError(
            f"ensemble member shape {ens.shape[1:]} does not match template shape {q0.shape}"
        )
    threads = _resolve_threads(threads)

    def run(j: int) -> np.ndarray:
        try:
            return forward(q0, ens[j], time_steps, tau)
        except BlowUpError as exc:
            raise BlowUpError(
                f"member {j}: {exc}", step=exc.step, member=j
            ) from exc

    predictions = np.empty_like(ens)
    if threads == 1 or ens.shape[0] == 1:
        for j in range(ens.shape[0]):
            predictions[j] = run(j)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for j, endpoint in enumerate(pool.map(run, range(ens.shape[0]))):
                predictions[j] = endpoint
    return predictions, predictions.mean(axis=0)


def anomalies(members, predictions):
    """Mean-centred, scaled deviation matrices of momenta and predictions.

    Column ``j`` of the first matrix is ``vec(members[j] - mean) / sqrt(N-1)``
    and likewise for predictions, with landmark-major, coordinate-minor
    flattening.  The sample covariances factor as
    ``Cov_QQ = Aq @ Aq.T`` and ``Cov_PQ = Ap @ Aq.T``.

    Returns
    -------
    (anom_p, anom_q) : pair of ndarray, shape (M*d, n_members)
    """
    ens = as_ensemble(members, "members")
    preds = as_ensemble(predictions, "predictions")
    if ens.shape != preds.shape:
        raise ValueError(
            f"members shape {ens.shape} does not match predictions shape {preds.shape}"
        )
    n_members = ens.shape[0]
    scale = 1.0 / math.sqrt(n_members - 1)
    anom_p = (ens - ens.mean(axis=0)).reshape(n_members, -1).T * scale
    anom_q = (preds - preds.mean(axis=0)).reshape(n_members, -1).T * scale
    return anom_p, anom_q


class _GainOperator:
    """Regularised Kalman gain factored once and applied to many residuals.

    Holds the Cholesky factorisation of ``Cov_QQ + xi I`` (dense, size M*d)
    and the dense cross-covariance ``Cov_PQ``.
    """

    def __init__(self, anom_p: np.ndarray, anom_q: np.ndarray, xi: float):
        dim = anom_q.shape[0]
        if anom_p.shape[0] != dim or anom_p.shape[1] != anom_q.shape[1]:
            raise ValueError(
                f"anomaly shapes {anom_p.shape} and {anom_q.shape} are inconsistent"
            )
        if not np.isfinite(xi):
            raise ValueError(f"xi must be finite, got {xi!r}")
        self.cov_pq = anom_p @ anom_q.T
        regularised = anom_q @ anom_q.T + xi * np.eye(dim)
        self._chol = scipy.linalg.cho_factor(regularised, lower=True)

    def apply(self, residual_columns: np.ndarray) -> np.ndarray:
        """Apply the gain to residuals stacked as columns, shape (M*d, k)."""
        return self.cov_pq @ scipy.linalg.cho_solve(self._chol, residual_columns)


def kalman_apply(anom_p, anom_q, xi: float, residual) -> np.ndarray:
    """Apply the regularised Kalman gain to one prediction residual.

    Computes ``Cov_PQ (Cov_QQ + xi I)^(-1) vec(residual)`` with a symmetric
    positive-definite factorisation, and reshapes back to ``(M, d)``.

    Parameters
    ----------
    anom_p, anom_q : ndarray, shape (M*d, n_members)
        Output of :func:`anomalies`.
    xi : float
        Regularisation added to the prediction covariance; must keep the
        system positive definite (any ``xi > 0`` does).
    residual : ndarray, shape (M, d)
        Target minus prediction.

    Raises
    ------
    scipy.linalg.LinAlgError
        If the regularised covariance is not positive definite (possible only
        for ``xi <= 0`` or non-finite inputs).
    """
    res = as_landmarks(residual, "residual")
    anom_p = np.asarray(anom_p, dtype=float)
    anom_q = np.asarray(anom_q, dtype=float)
    if res.size != anom_q.shape[0]:
        raise ValueError(
            f"residual has {res.size} components but anomalies describe {anom_q.shape[0]}"
        )
    operator = _GainOperator(anom_p, anom_q, xi)
    return operator.apply(res.reshape(-1, 1))[:, 0].reshape(res.shape)


def enkf_match(template, target, ensemble, config: MatchConfig | None = None,
               threads: int = 1) -> MatchResult:
    """Match ``template`` to ``target`` by iterative ensemble Kalman updates.

    Per iteration ``k``: shoot every member, record the squared misfit
    ``E_k = |target - mean_prediction|^2``, stop when
    ``sqrt(E_k) <= tolerance`` or the iteration budget is exhausted, otherwise
    update each member with the shared gain of iteration ``k`` and its own
    residual.  Predictions are computed once per iteration and reused for the
    update.

    Parameters
    ----------
    template, target : ndarray, shape (M, d)
        Start and desired landmark configurations.
    ensemble : ndarray, shape (n_members, M, d)
        Initial momentum ensemble; the filter searches its affine hull.
    config : MatchConfig, optional
        Defaults to ``MatchConfig()``.
    threads : int
        Worker threads for member shooting; does not affect results.

    Returns
    -------
    MatchResult

    Raises
    ------
    BlowUpError
        A diverging member aborts the run; the message carries the iteration
        and member indices.
    """
    cfg = config if config is not None else MatchConfig()
    q0 = as_landmarks(template, "template")
    q1 = as_landmarks(target, "target")
    if q0.shape != q1.shape:
        raise ValueError(
            f"template shape {q0.shape} does not match target shape {q1.shape}"
        )
    members = as_ensemble(ensemble).copy()
    if members.shape[1:] != q0.shape:
        raise ValueError(
            f"ensemble member shape {members.shape[1:]} does not match "
            f"template shape {q0.shape}"
        )

    n_members = members.shape[0]
    flat_dim = q0.size
    misfits: list[float] = []
    timings = dict.fromkeys(PHASES, 0.0)
    converged = False
    iteration = 0

    for iteration in range(cfg.iterations + 1):
        tic = time.perf_counter()
        try:
            predictions, mean_prediction = ensemble_forward(
                members, q0, cfg.time_steps, cfg.tau, threads=threads
            )
        except BlowUpError as exc:
            raise BlowUpError(
                f"iteration {iteration}: {exc}",
                step=exc.step, member=exc.member, iteration=iteration,
            ) from exc
        timings["shoot"] += time.perf_counter() - tic

        misfit = float(np.sum((q1 - mean_prediction) ** 2))
        if not np.isfinite(misfit):
            raise BlowUpError(
                f"iteration {iteration}: non-finite misfit", iteration=iteration
            )
        misfits.append(misfit)
        if math.sqrt(misfit) <= cfg.tolerance:
            converged = True
            break
        if iteration == cfg.iterations:
            break

        tic = time.perf_counter()
        anom_p, anom_q = anomalies(members, predictions)
        timings["stats"] += time.perf_counter() - tic

        tic = time.perf_counter()
        gain = _GainOperator(anom_p, anom_q, cfg.xi)
        residuals = (q1[None, :, :] - predictions).reshape(n_members, flat_dim).T
        updates = gain.apply(residuals)
        timings["solve"] += time.perf_counter() - tic

        tic = time.perf_counter()
        members += updates.T.reshape(members.shape)
        timings["update"] += time.perf_counter() - tic

    trace = MisfitTrace(
        values=np.asarray(misfits), converged=converged, iterations_run=iteration
    )
    return MatchResult(
        ensemble=members,
        mean_momentum=members.mean(axis=0),
        trace=trace,
        timings=timings,
        config=cfg,
    )
