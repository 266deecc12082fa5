"""Extended Kalman filter and a finite-difference Jacobian check."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from kalman_bench.bkf import CorrectionReport, StateEstimate, correct_with
from kalman_bench.errors import DimensionError, DivergenceError
from kalman_bench.linalg import as_mat, as_vec, symmetrize


@dataclass(frozen=True)
class NonlinearModel:
    """Transition ``f(x, u, dt)`` and measurement ``h(x)`` with additive noise.

    ``jac_f`` / ``jac_h`` are only needed by the EKF. When ``vectorized`` is
    set, ``f`` and ``h`` also accept a stack of states of shape (m, N) and
    return one row per state; the UKF then propagates all sigma points in a
    single call.
    """

    f: Callable
    h: Callable
    q: np.ndarray
    r: np.ndarray
    jac_f: Optional[Callable] = None
    jac_h: Optional[Callable] = None
    vectorized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "q", as_mat(self.q, "q"))
        object.__setattr__(self, "r", as_mat(self.r, "r"))


def _finite(x: np.ndarray, what: str, state) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"{what} produced non-finite values", state=np.array(state, copy=True))
    return x


def ekf_predict(prior: StateEstimate, model: NonlinearModel, u, dt: float) -> StateEstimate:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if model.jac_f is None:
        raise ValueError("EKF prediction needs an analytic transition Jacobian")
    x = _finite(as_vec(model.f(prior.x_hat, u, dt)), "transition", prior.x_hat)
    if x.size != prior.n or model.q.shape != (prior.n, prior.n):
        raise DimensionError(f"transition returned length {x.size}, q is {model.q.shape}, N={prior.n}")
    jac = as_mat(model.jac_f(prior.x_hat, u, dt), "jac_f")
    p = symmetrize(jac @ prior.p @ jac.T + model.q)
    return StateEstimate(x, p, prior.k + 1, prior.t + dt)


def ekf_correct(pred: StateEstimate, model: NonlinearModel, z) -> CorrectionReport:
    if model.jac_h is None:
        raise ValueError("EKF correction needs an analytic measurement Jacobian")
    z_pred = _finite(as_vec(model.h(pred.x_hat)), "measurement map", pred.x_hat)
    h = as_mat(model.jac_h(pred.x_hat), "jac_h")
    if h.shape != (z_pred.size, pred.n):
        raise DimensionError(f"jac_h has shape {h.shape}, expected {(z_pred.size, pred.n)}")
    return correct_with(pred, z, z_pred, h, model.r)


@dataclass(frozen=True)
class JacobianCheck:
    ok: bool
    max_rel_error: float
    numeric: np.ndarray


def numeric_jacobian(fn: Callable, point) -> np.ndarray:
    """Central differences with step max(1e-6, 1e-6 |x_i|)."""
    x = as_vec(point, "point")
    cols = []
    for i in range(x.size):
        h = max(1e-6, 1e-6 * abs(x[i]))
        up, down = x.copy(), x.copy()
        up[i] += h
        down[i] -= h
        cols.append((as_vec(fn(up)) - as_vec(fn(down))) / (2.0 * h))
    return np.column_stack(cols)


def jacobian_check(fn: Callable, point, analytic, rel_tol: float) -> JacobianCheck:
    """Compare an analytic Jacobian against central finite differences.

    Each entry's deviation is divided by the largest magnitude in its row, so
    near-zero entries sitting next to O(1) ones are judged on the row's scale.
    Report-only: a mismatch returns ``ok=False`` rather than raising.
    """
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    analytic = as_mat(analytic, "analytic")
    numeric = numeric_jacobian(fn, point)
    if numeric.shape != analytic.shape:
        return JacobianCheck(False, float("inf"), numeric)
    row_scale = np.maximum(np.max(np.abs(analytic), axis=1, keepdims=True), np.max(np.abs(numeric), axis=1, keepdims=True))
    scale = np.maximum(row_scale, np.finfo(float).tiny)
    err = float(np.max(np.abs(analytic - numeric) / scale))
    return JacobianCheck(err <= rel_tol, err, numeric)
