"""Basic (linear) Kalman filter: prediction, correction and the Joseph form."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from kalman_bench.errors import DegenerateInnovationError, DimensionError, NotPositiveDefiniteError
from kalman_bench.linalg import as_mat, as_vec, solve_spd, symmetrize


@dataclass(frozen=True)
class StateEstimate:
    """Mean and covariance of the state at time index ``k`` (time ``t``, seconds)."""

    x_hat: np.ndarray
    p: np.ndarray
    k: int = 0
    t: float = 0.0

    def __post_init__(self):
        x = as_vec(self.x_hat, "x_hat")
        p = as_mat(self.p, "p")
        if p.shape != (x.size, x.size):
            raise DimensionError(f"covariance {p.shape} does not match state of length {x.size}")
        object.__setattr__(self, "x_hat", x)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.x_hat.size


@dataclass(frozen=True)
class LinearModel:
    """One step of a linear system: x' = f x + b u + q, z = h x + r."""

    f: np.ndarray
    b: np.ndarray
    h: np.ndarray
    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        for name in ("f", "b", "h", "q", "r"):
            object.__setattr__(self, name, as_mat(getattr(self, name), name))
        n = self.f.shape[0]
        k = self.h.shape[0]
        if self.f.shape != (n, n) or self.q.shape != (n, n):
            raise DimensionError(f"f {self.f.shape} and q {self.q.shape} must both be {n}x{n}")
        if self.b.shape[0] != n or self.h.shape[1] != n:
            raise DimensionError(f"b {self.b.shape} / h {self.h.shape} do not conform to N={n}")
        if self.r.shape != (k, k):
            raise DimensionError(f"r {self.r.shape} must be {k}x{k}")
        if k > n:
            raise DimensionError(f"more measurements ({k}) than state components ({n})")


@dataclass(frozen=True)
class CorrectionReport:
    z_pred: np.ndarray
    residual: np.ndarray
    s: np.ndarray
    gain: np.ndarray
    posterior: StateEstimate
    extras: dict = field(default_factory=dict, compare=False)


def _check_conform(est: StateEstimate, model: LinearModel) -> None:
    if model.f.shape[0] != est.n:
        raise DimensionError(f"model has N={model.f.shape[0]} but estimate has N={est.n}")


def kalman_gain(pht: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Gain ``pht @ inv(s)`` computed as a solve: s.T @ gain.T = pht.T."""
    try:
        return solve_spd(s.T, pht.T).T
    except (NotPositiveDefiniteError, ValueError) as exc:
        raise DegenerateInnovationError(f"innovation covariance is not positive definite: {exc}") from exc


def bkf_predict(prior: StateEstimate, model: LinearModel, u, dt: float) -> StateEstimate:
    _check_conform(prior, model)
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    u = as_vec(u, "u")
    if u.size != model.b.shape[1]:
        raise DimensionError(f"control vector has length {u.size}, b expects {model.b.shape[1]}")
    x = model.f @ prior.x_hat + model.b @ u
    p = symmetrize(model.f @ prior.p @ model.f.T + model.q)
    return StateEstimate(x, p, prior.k + 1, prior.t + dt)


def correct_with(pred: StateEstimate, z, z_pred: np.ndarray, h: np.ndarray, r: np.ndarray) -> CorrectionReport:
    """Shared correction step for BKF and EKF given the predicted measurement and H."""
    z = as_vec(z, "z")
    if z.size != h.shape[0]:
        raise DimensionError(f"measurement has length {z.size}, h has {h.shape[0]} rows")
    residual = z - z_pred
    pht = pred.p @ h.T
    s = symmetrize(h @ pht + r)
    gain = kalman_gain(pht, s)
    x = pred.x_hat + gain @ residual
    p = symmetrize((np.eye(pred.n) - gain @ h) @ pred.p)
    return CorrectionReport(z_pred, residual, s, gain, replace(pred, x_hat=x, p=p))


def bkf_correct(pred: StateEstimate, model: LinearModel, z) -> CorrectionReport:
    _check_conform(pred, model)
    return correct_with(pred, z, model.h @ pred.x_hat, model.h, model.r)


def joseph_update(pred: StateEstimate, model: LinearModel, gain) -> np.ndarray:
    """Posterior covariance for an arbitrary gain.

    (I - K H) P (I - K H)^T + K R K^T. For the optimal gain this coincides with
    the short form (I - K H) P used by :func:`bkf_correct`.
    """
    _check_conform(pred, model)
    gain = as_mat(gain, "gain")
    if gain.shape != (pred.n, model.h.shape[0]):
        raise DimensionError(f"gain {gain.shape} must be {pred.n}x{model.h.shape[0]}")
    a = np.eye(pred.n) - gain @ model.h
    return symmetrize(a @ pred.p @ a.T + gain @ model.r @ gain.T)
