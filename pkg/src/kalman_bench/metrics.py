"""Residual statistics for filtered runs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from kalman_bench.sim import TrajectoryRecord


@dataclass(frozen=True)
class FitReport:
    chi2: float
    dof: int
    reduced_chi2: float
    rmse_per_component: Optional[np.ndarray] = None
    noise_reduction_ratio: Optional[np.ndarray] = None


def reduced_chi2(residuals, meas_sigmas) -> FitReport:
    """Sum of squared sigma-normalized residuals over epochs x components.

    Degrees of freedom are epochs * K; nothing is subtracted for the state,
    which is estimated rather than fitted.
    """
    r = np.asarray(residuals, dtype=float)
    if r.ndim == 1:
        r = r[:, None]
    sig = np.broadcast_to(np.asarray(meas_sigmas, dtype=float), (r.shape[1],))
    if r.shape[0] < 1:
        raise ValueError("need at least one epoch")
    if np.any(sig <= 0):
        raise ValueError("measurement sigmas must be positive")
    chi2 = float(np.sum(np.square(r / sig)))
    dof = r.size
    return FitReport(chi2, dof, chi2 / dof)


def noise_reduction(record: TrajectoryRecord) -> np.ndarray:
    """std(filtered - truth) / std(raw - truth) per measured component.

    Both are taken in measurement space, so for H = I they are per state
    component.
    """
    if record.clean is None or record.fitted is None:
        raise ValueError("noise reduction needs the truth series and filtered estimates")
    raw = np.std(record.measurements - record.clean, axis=0)
    filt = np.std(record.fitted - record.clean, axis=0)
    if np.any(raw == 0):
        raise ZeroDivisionError("raw measurement error has zero spread")
    return filt / raw


def rmse(record: TrajectoryRecord) -> np.ndarray:
    """Root-mean-square estimation error per state component."""
    if record.truth is None or record.x_hat is None:
        raise ValueError("rmse needs truth and estimates")
    return np.sqrt(np.mean(np.square(record.x_hat - record.truth), axis=0))


def lag1_autocorrelation(series) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    d = x - x.mean(axis=0)
    return np.sum(d[1:] * d[:-1], axis=0) / np.sum(d * d, axis=0)


def mean_with_stderr(series) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and its naive standard error std / sqrt(n)."""
    x = np.asarray(series, dtype=float)
    return x.mean(axis=0), x.std(axis=0, ddof=1) / np.sqrt(x.shape[0])


def fit_report(record: TrajectoryRecord, meas_sigmas) -> FitReport:
    """Reduced chi-squared of the post-update residuals plus truth-based errors when available."""
    base = reduced_chi2(record.residuals, meas_sigmas)
    errs = rmse(record) if record.truth is not None else None
    ratio = None
    if record.clean is not None:
        try:
            ratio = noise_reduction(record)
        except ZeroDivisionError:
            ratio = None
    return FitReport(base.chi2, base.dof, base.reduced_chi2, errs, ratio)
