"""Unscented Kalman filter, standard (non-augmented) form.

Prediction spreads 2N+1 sigma points around the previous posterior and pushes
them through the transition map. Correction draws a fresh sigma set around the
prediction, pushes it through the measurement map and pairs those deviations
with the propagated prediction points in the cross-covariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from kalman_bench.bkf import CorrectionReport, StateEstimate, kalman_gain
from kalman_bench.ekf import NonlinearModel
from kalman_bench.errors import DimensionError, DivergenceError
from kalman_bench.linalg import as_mat, as_vec, cholesky, symmetrize


CROSS_COV_MODES = ("printed", "consistent")


@dataclass(frozen=True)
class UTParams:
    """Scaling of the unscented transform.

    ``alpha`` sets the spread, ``kappa`` the secondary scaling and ``beta``
    folds in prior knowledge of the distribution (2 is optimal for Gaussians).
    """

    alpha: float = 1e-3
    beta: float = 2.0
    kappa: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")

    def lam(self, n: int) -> float:
        return self.alpha**2 * (n + self.kappa) - n


@dataclass(frozen=True)
class SigmaSet:
    points: np.ndarray  # (2N+1, N), row 0 is the mean
    w_x: np.ndarray
    w_p: np.ndarray


def ut_weights(n: int, params: UTParams) -> tuple[np.ndarray, np.ndarray]:
    """Mean weights ``w_x`` and covariance weights ``w_p`` for 2n+1 points."""
    if n < 1:
        raise ValueError("dimension must be at least 1")
    lam = params.lam(n)
    c = n + lam
    if c == 0.0:
        raise ZeroDivisionError(f"N + lambda vanishes for N={n}, {params}")
    w_x = np.full(2 * n + 1, 1.0 / (2.0 * c))
    w_p = w_x.copy()
    w_x[0] = lam / c
    w_p[0] = w_x[0] + 1.0 - params.alpha**2 + params.beta
    return w_x, w_p


def sigma_points(mean, cov, lam: float) -> np.ndarray:
    """Rows: mean, mean + columns of chol((N+lam) cov), mean - the same columns."""
    mean = as_vec(mean, "mean")
    cov = as_mat(cov, "cov")
    n = mean.size
    if cov.shape != (n, n):
        raise DimensionError(f"cov {cov.shape} does not match mean of length {n}")
    c = n + lam
    if not c > 0:
        raise ValueError(f"N + lambda = {c} must be positive for a real square root")
    cols = cholesky(c * cov).T
    return np.vstack([mean, mean + cols, mean - cols])


def sigma_set(mean, cov, params: UTParams) -> SigmaSet:
    mean = as_vec(mean, "mean")
    n = mean.size
    w_x, w_p = ut_weights(n, params)
    pts = sigma_points(mean, cov, params.lam(n))
    assert abs(w_x.sum() - 1.0) <= 1e-9 * max(1.0, float(np.abs(w_x).max()))
    assert np.allclose(pts[1:n + 1] + pts[n + 1:], 2.0 * pts[0], rtol=1e-12, atol=1e-12 * float(np.abs(mean).max() + 1.0))
    return SigmaSet(pts, w_x, w_p)


def _map_points(fn, points: np.ndarray, vectorized: bool) -> np.ndarray:
    if vectorized:
        out = np.asarray(fn(points), dtype=float)
    else:
        out = np.array([as_vec(fn(p)) for p in points])
    if out.ndim == 1:
        out = out[:, None]
    if not np.all(np.isfinite(out)):
        raise DivergenceError("sigma-point propagation produced non-finite values", state=points[0].copy())
    return out


def _weighted_mean(w: np.ndarray, y: np.ndarray) -> np.ndarray:
    # weights sum to one, so offset by the central point to limit cancellation
    # when the central weight is large and negative
    return y[0] + w @ (y - y[0])


def ukf_predict(
    prior: StateEstimate, model: NonlinearModel, u, dt: float, params: UTParams
) -> tuple[StateEstimate, np.ndarray]:
    """Unscented prediction; also returns the propagated sigma points f(x_i)."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    ss = sigma_set(prior.x_hat, prior.p, params)
    prop = _map_points(lambda x: model.f(x, u, dt), ss.points, model.vectorized)
    if prop.shape[1] != prior.n or model.q.shape != (prior.n, prior.n):
        raise DimensionError(f"transition returned {prop.shape[1]} components, q is {model.q.shape}, N={prior.n}")
    x = _weighted_mean(ss.w_x, prop)
    dev = prop - x
    p = symmetrize((ss.w_p[:, None] * dev).T @ dev + model.q)
    return StateEstimate(x, p, prior.k + 1, prior.t + dt), prop


def ukf_correct(
    pred: StateEstimate,
    propagated: np.ndarray,
    model: NonlinearModel,
    z,
    params: UTParams,
    reuse_points: bool = False,
    cross_cov: str = "printed",
) -> CorrectionReport:
    """Unscented correction.

    By default a fresh sigma set is drawn around the prediction for the
    measurement map while the cross-covariance uses the propagated prediction
    points. ``reuse_points`` feeds the propagated points to ``h`` instead.

    ``cross_cov="consistent"`` builds the cross-covariance from the same points
    that were fed to ``h``. That variant reproduces the linear filter exactly
    when f and h are linear; the default pairing does not, because the
    propagated points carry no process noise and a different square root.
    """
    if cross_cov not in CROSS_COV_MODES:
        raise ValueError(f"cross_cov must be one of {CROSS_COV_MODES}, got {cross_cov!r}")
    z = as_vec(z, "z")
    n = pred.n
    w_x, w_p = ut_weights(n, params)
    propagated = as_mat(propagated, "propagated")
    if propagated.shape != (2 * n + 1, n):
        raise DimensionError(f"propagated points {propagated.shape}, expected {(2 * n + 1, n)}")
    pts = propagated if reuse_points else sigma_set(pred.x_hat, pred.p, params).points
    hy = _map_points(model.h, pts, model.vectorized)
    if hy.shape[1] != z.size or model.r.shape != (z.size, z.size):
        raise DimensionError(f"measurement map returned {hy.shape[1]} components for a length-{z.size} measurement")

    z_pred = _weighted_mean(w_x, hy)
    residual = z - z_pred
    dz = hy - z_pred
    s = symmetrize((w_p[:, None] * dz).T @ dz + model.r)
    dx = (propagated if cross_cov == "printed" else pts) - pred.x_hat
    c = (w_p[:, None] * dx).T @ dz
    gain = kalman_gain(c, s)
    x = pred.x_hat + gain @ residual
    p = symmetrize(pred.p - gain @ s @ gain.T)
    post = StateEstimate(x, p, pred.k, pred.t)
    return CorrectionReport(z_pred, residual, s, gain, post, extras={"cross_cov": c})

