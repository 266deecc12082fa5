"""Fixed-step classical Runge-Kutta integration."""

from __future__ import annotations

from typing import Callable

import numpy as np

from kalman_bench.errors import DivergenceError


def rk4_step(derivs: Callable[[np.ndarray], np.ndarray], state, dt: float) -> np.ndarray:
    """One classical 4th-order Runge-Kutta step of an autonomous system.

    ``state`` may be a single state or a stack of states (one per row) as long
    as ``derivs`` handles the same shape.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    y = np.asarray(state, dtype=float)
    k1 = np.asarray(derivs(y))
    k2 = np.asarray(derivs(y + 0.5 * dt * k1))
    k3 = np.asarray(derivs(y + 0.5 * dt * k2))
    k4 = np.asarray(derivs(y + dt * k3))
    for k in (k1, k2, k3, k4):
        if not np.all(np.isfinite(k)):
            raise DivergenceError("derivative evaluated to a non-finite value", state=y.copy())
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(derivs: Callable, state, duration: float, n_steps: int) -> np.ndarray:
    """Advance ``state`` by ``duration`` using ``n_steps`` equal RK4 steps."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    h = duration / n_steps
    y = np.asarray(state, dtype=float)
    for _ in range(n_steps):
        y = rk4_step(derivs, y, h)
    return y
