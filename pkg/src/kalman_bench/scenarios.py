"""The three test systems: free fall (with optional viscous drag),
Lotka-Volterra predator/prey, and planar atmospheric re-entry observed by a
range/elevation radar.

Re-entry quantities are in km and s throughout. State functions accept either
a single state vector or a stack of states with one state per row, which lets
the UKF propagate all sigma points in one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from kalman_bench.bkf import LinearModel
from kalman_bench.ekf import NonlinearModel
from kalman_bench.errors import DimensionError, SingularGeometryError
from kalman_bench.ode import rk4_integrate

STANDARD_GRAVITY = 9.80665  # m/s^2

# ---------------------------------------------------------------- free fall


@dataclass(frozen=True)
class FreeFallParams:
    x0: float = 10.0  # m, positive upwards
    v0: float = 3.0  # m/s
    g: float = STANDARD_GRAVITY
    mu: float = 0.0  # drag rate b/m, 1/s
    q_sigmas: tuple = (0.002, 0.002)  # process noise per step: m, m/s
    r_sigmas: tuple = (0.01, 0.01)  # measurement noise: m, m/s

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError("g must be positive")
        if self.mu < 0:
            raise ValueError("mu must be non-negative")


def _drag_factors(mu: float, t: float) -> tuple[float, float]:
    """(1 - exp(-mu t)) / mu and exp(-mu t), stable as mu t -> 0."""
    mt = mu * t
    one_minus = -math.expm1(-mt)
    return (one_minus / mu if mu > 0 else t), 1.0 - one_minus


def _fall_factor(mu: float, t: float) -> float:
    """(exp(-mu t) - 1 + mu t) / mu^2, the drag-adjusted t^2/2.

    The direct formula loses everything to cancellation for small mu t, so a
    Taylor series is used there.
    """
    z = mu * t
    if z < 0.1:
        term, total = 0.5, 0.5
        for k in range(3, 14):
            term *= -z / k
            total += term
        return t * t * total
    return (math.expm1(-z) + z) / (mu * mu)


def freefall_exact(p: FreeFallParams, t: float) -> tuple[float, float]:
    """Height and velocity at time ``t`` from the closed-form solutions."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if p.mu == 0.0:
        return p.x0 + p.v0 * t - 0.5 * p.g * t * t, p.v0 - p.g * t
    span, decay = _drag_factors(p.mu, t)
    return p.x0 + p.v0 * span - p.g * _fall_factor(p.mu, t), p.v0 * decay - p.g * span


def freefall_transition_matrix(mu: float, dt: float) -> np.ndarray:
    """Linear part of the exact one-step map (identity-plus-drift for mu = 0)."""
    span, decay = _drag_factors(mu, dt)
    return np.array([[1.0, span], [0.0, decay]])


def freefall_step(state, p: FreeFallParams, dt: float) -> np.ndarray:
    """Exact propagation of (height, velocity) rows over ``dt``."""
    s = np.asarray(state, dtype=float)
    x, v = s[..., 0], s[..., 1]
    if p.mu == 0.0:
        return np.stack([x + v * dt - 0.5 * p.g * dt * dt, v - p.g * dt], axis=-1)
    span, decay = _drag_factors(p.mu, dt)
    fall = _fall_factor(p.mu, dt)
    return np.stack([x + v * span - p.g * fall, v * decay - p.g * span], axis=-1)


def freefall_h(observe: str) -> np.ndarray:
    if observe == "full":
        return np.eye(2)
    if observe == "height_only":
        return np.array([[1.0, 0.0]])
    raise ValueError(f"observe must be 'full' or 'height_only', got {observe!r}")


def freefall_linear_model(p: FreeFallParams, dt: float, observe: str = "full") -> tuple[LinearModel, np.ndarray]:
    """Constant-gravity model as (LinearModel, control vector u = (-g,))."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if p.mu > 0:
        raise ValueError("the linear free-fall model is drag-free; use the EKF/UKF model for mu > 0")
    h = freefall_h(observe)
    r = np.diag(np.square(p.r_sigmas[: h.shape[0]]))
    model = LinearModel(
        f=np.array([[1.0, dt], [0.0, 1.0]]),
        b=np.array([[0.5 * dt * dt], [dt]]),
        h=h,
        q=np.diag(np.square(p.q_sigmas)),
        r=r,
    )
    return model, np.array([-p.g])


def freefall_nonlinear_model(p: FreeFallParams, observe: str = "full") -> NonlinearModel:
    """Free fall (with or without drag) in the form used by the EKF and UKF."""
    h = freefall_h(observe)
    return NonlinearModel(
        f=lambda x, u, dt: freefall_step(x, p, dt),
        h=lambda x: np.asarray(x) @ h.T,
        q=np.diag(np.square(p.q_sigmas)),
        r=np.diag(np.square(p.r_sigmas[: h.shape[0]])),
        jac_f=lambda x, u, dt: freefall_transition_matrix(p.mu, dt),
        jac_h=lambda x: h,
        vectorized=True,
    )


# ---------------------------------------------------------- Lotka-Volterra


@dataclass(frozen=True)
class LVParams:
    alpha: float = 1.0
    beta: float = 0.2
    gamma: float = 5.0
    delta: float = 0.3
    x0: float = 10.0
    y0: float = 10.0
    q_sigma: float = 0.2  # process noise per unit time; per step it is q_sigma * sqrt(dt)
    r_sigma: float = 1.0

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma, self.delta) <= 0:
            raise ValueError("all four Lotka-Volterra rates must be positive")
        if self.x0 < 0 or self.y0 < 0:
            raise ValueError("populations must be non-negative")


def lv_derivatives(state, p: LVParams) -> np.ndarray:
    s = np.asarray(state, dtype=float)
    x, y = s[..., 0], s[..., 1]
    return np.stack([x * (p.alpha - p.beta * y), y * (-p.gamma + p.delta * x)], axis=-1)


def lv_transition(state, p: LVParams, dt: float) -> np.ndarray:
    """Explicit Euler step of the population equations."""
    s = np.asarray(state, dtype=float)
    return s + lv_derivatives(s, p) * dt


def lv_jacobian(state, p: LVParams, dt: float) -> np.ndarray:
    x, y = np.asarray(state, dtype=float)
    return np.array(
        [
            [1.0 + p.alpha * dt - p.beta * y * dt, -p.beta * x * dt],
            [p.delta * y * dt, 1.0 - p.gamma * dt + p.delta * x * dt],
        ]
    )


def lv_model(p: LVParams, dt: float) -> NonlinearModel:
    return NonlinearModel(
        f=lambda x, u, dt: lv_transition(x, p, dt),
        h=lambda x: np.asarray(x, dtype=float).copy(),
        q=np.eye(2) * p.q_sigma**2 * dt,
        r=np.eye(2) * p.r_sigma**2,
        jac_f=lambda x, u, dt: lv_jacobian(x, p, dt),
        jac_h=lambda x: np.eye(2),
        vectorized=True,
    )


# ----------------------------------------------------------------- re-entry


@dataclass(frozen=True)
class ReentryParams:
    """Constants of the planar re-entry problem (km, s, kg)."""

    gamma0: float = 0.59783  # 1/km; positive so the drag opposes the motion
    r_c: float = 13.406  # km
    G_N: float = 6.6738e-11  # m^3 kg^-1 s^-2
    M: float = 5.9726e24  # kg
    R: float = 6378.137  # km
    radar_x1: float = 6378.137  # km
    radar_x2: float = 0.0  # km
    sample_rate: float = 10.0  # Hz
    meas_sigma_d: float = 1e-3  # km
    meas_sigma_theta: float = 0.17e-3  # rad

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise ValueError("gamma0 must be positive with the drag sign convention used here")

    @property
    def gm(self) -> float:
        """G_N * M in km^3/s^2."""
        return self.G_N * self.M * 1e-9

    @property
    def radar(self) -> tuple[float, float]:
        return self.radar_x1, self.radar_x2

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def r_matrix(self) -> np.ndarray:
        return np.diag([self.meas_sigma_d**2, self.meas_sigma_theta**2])


_Q_VEL = 2.4064e-5  # km^2/s^4


@dataclass(frozen=True)
class ReentryInit:
    """Initial truth, filter start and the two process-noise matrices.

    The simulation runs with no noise on the aerodynamic term while the filter
    carries a small variance on it so that the estimate can move.
    """

    x0_true: tuple = (6500.4, 349.14, -1.8093, -6.7967, 0.6932)
    q_sim_diag: tuple = (0.0, 0.0, _Q_VEL, _Q_VEL, 0.0)
    q_filter_diag: tuple = (0.0, 0.0, _Q_VEL, _Q_VEL, 1e-6)
    x0_est: tuple = (6500.4, 349.14, -1.8093, -6.7967, 0.0)
    p0_diag: tuple = (1e-6, 1e-6, 1e-6, 1e-6, 1.0)

    def __post_init__(self):
        for name in ("x0_true", "q_sim_diag", "q_filter_diag", "x0_est", "p0_diag"):
            if len(getattr(self, name)) != 5:
                raise DimensionError(f"{name} must have 5 entries")
        if min(self.q_sim_diag) < 0 or min(self.q_filter_diag) < 0 or min(self.p0_diag) < 0:
            raise ValueError("covariance diagonals must be non-negative")

    @property
    def q_sim(self) -> np.ndarray:
        return np.diag(self.q_sim_diag)

    @property
    def q_filter(self) -> np.ndarray:
        return np.diag(self.q_filter_diag)


def _drag_and_gravity(s: np.ndarray, p: ReentryParams):
    x1, x2, x3, x4, x5 = (s[..., i] for i in range(5))
    r = np.hypot(x1, x2)
    if np.any(r == 0):
        raise SingularGeometryError("re-entry dynamics are singular at r = 0")
    v = np.hypot(x3, x4)
    a = -p.gamma0 * np.exp(x5) * np.exp((p.R - r) / p.r_c) * v
    b = -p.gm / r**3
    return a, b, r, v


def reentry_derivatives(state, p: ReentryParams, noise=None) -> np.ndarray:
    """Time derivative of (x1, x2, x3, x4, x5).

    ``noise`` holds the (q3, q4, q5) accelerations; ``None`` means zero.
    """
    s = np.asarray(state, dtype=float)
    a, b, _, _ = _drag_and_gravity(s, p)
    d = np.empty_like(s)
    d[..., 0] = s[..., 2]
    d[..., 1] = s[..., 3]
    d[..., 2] = a * s[..., 2] + b * s[..., 0]
    d[..., 3] = a * s[..., 3] + b * s[..., 1]
    d[..., 4] = 0.0
    if noise is not None:
        d[..., 2:] += np.asarray(noise, dtype=float)
    return d


def reentry_derivatives_jacobian(state, p: ReentryParams) -> np.ndarray:
    """Jacobian of :func:`reentry_derivatives` (noise-free) for one state."""
    s = np.asarray(state, dtype=float)
    x1, x2, x3, x4, _ = s
    a, b, r, v = _drag_and_gravity(s, p)
    # partials of the drag factor a and the gravity factor b
    da = np.array([-a * x1 / (r * p.r_c), -a * x2 / (r * p.r_c), 0.0, 0.0, a])
    if v > 0:
        da[2], da[3] = a * x3 / v**2, a * x4 / v**2
    db = np.array([3.0 * p.gm * x1 / r**5, 3.0 * p.gm * x2 / r**5, 0.0, 0.0, 0.0])
    j = np.zeros((5, 5))
    j[0, 2] = 1.0
    j[1, 3] = 1.0
    j[2] = da * x3 + db * x1
    j[3] = da * x4 + db * x2
    j[2, 0] += b
    j[2, 2] += a
    j[3, 1] += b
    j[3, 3] += a
    return j


def reentry_transition(state, p: ReentryParams, dt: float, inner_steps: int = 10) -> np.ndarray:
    """Noise-free RK4 propagation over ``dt`` with ``inner_steps`` substeps."""
    return rk4_integrate(lambda s: reentry_derivatives(s, p), state, dt, inner_steps)


def reentry_transition_jacobian(state, p: ReentryParams, dt: float, inner_steps: int = 10) -> np.ndarray:
    """Exact Jacobian of :func:`reentry_transition`.

    RK4 is run on the state together with its sensitivity matrix, which
    reproduces the derivative of the discrete RK4 map itself.
    """
    x = np.asarray(state, dtype=float)

    def aug(y):
        xs, phi = y[:5], y[5:].reshape(5, 5)
        return np.concatenate([reentry_derivatives(xs, p), (reentry_derivatives_jacobian(xs, p) @ phi).ravel()])

    y = rk4_integrate(aug, np.concatenate([x, np.eye(5).ravel()]), dt, inner_steps)
    return y[5:].reshape(5, 5)


def radar_measure(state, p: ReentryParams, noise=None) -> np.ndarray:
    """Range (km) and elevation angle (rad) seen from the radar."""
    s = np.asarray(state, dtype=float)
    dx = s[..., 0] - p.radar_x1
    dy = s[..., 1] - p.radar_x2
    d = np.hypot(dx, dy)
    if np.any(d == 0):
        raise SingularGeometryError("target coincides with the radar position")
    z = np.stack([d, np.arctan2(dy, dx)], axis=-1)
    if noise is not None:
        z = z + np.asarray(noise, dtype=float)
    return z


def radar_jacobian(state, p: ReentryParams) -> np.ndarray:
    s = np.asarray(state, dtype=float)
    dx, dy = s[0] - p.radar_x1, s[1] - p.radar_x2
    d2 = dx * dx + dy * dy
    if d2 == 0:
        raise SingularGeometryError("target coincides with the radar position")
    d = math.sqrt(d2)
    return np.array([[dx / d, dy / d, 0.0, 0.0, 0.0], [-dy / d2, dx / d2, 0.0, 0.0, 0.0]])


def radar_invert(z, p: ReentryParams) -> tuple[float, float]:
    """Position (x1, x2) reconstructed from a noise-free (d, theta) pair."""
    d, theta = z
    return p.radar_x1 + d * math.cos(theta), p.radar_x2 + d * math.sin(theta)


def reentry_model(p: ReentryParams, init: ReentryInit, inner_steps: int = 10) -> NonlinearModel:
    """Filter model for the re-entry run at the radar sampling period.

    The process-noise diagonal is read as the intensity of the accelerations
    driving the velocities (km^2/s^4 per second of flight), so the covariance
    added per prediction step is ``q_filter * dt``.
    """
    return NonlinearModel(
        f=lambda x, u, dt: reentry_transition(x, p, dt, inner_steps),
        h=lambda x: radar_measure(x, p),
        q=init.q_filter * p.dt,
        r=p.r_matrix,
        jac_f=lambda x, u, dt: reentry_transition_jacobian(x, p, dt, inner_steps),
        jac_h=lambda x: radar_jacobian(x, p),
        vectorized=True,
    )


# --------------------------------------------------------- parameter files


def load_params(path, *classes, overrides: dict | None = None) -> list:
    """Build parameter dataclasses from a ``name = value`` text file.

    Each key must name a field of exactly one of ``classes``; the result holds
    one instance per class, in order. Blank lines and ``#`` comments are
    skipped and tuple-valued fields take comma-separated numbers. Unknown keys
    raise ``KeyError``.
    """
    return parse_params(Path(path).read_text(), *classes, overrides=overrides, source=str(path))


def parse_params(text: str, *classes, overrides: dict | None = None, source: str = "<string>") -> list:
    owners = {f.name: (i, f) for i, cls in enumerate(classes) for f in fields(cls)}
    values: list[dict] = [{} for _ in classes]
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'name = value', got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in owners:
            names = "/".join(c.__name__ for c in classes)
            raise KeyError(f"{source}:{lineno}: unknown parameter {key!r} for {names}")
        i, f = owners[key]
        values[i][key] = _coerce(f, val, f"{source}:{lineno}")
    for key, val in (overrides or {}).items():
        values[owners[key][0]][key] = val
    return [cls(**v) for cls, v in zip(classes, values)]


def _coerce(f, val: str, where: str):
    try:
        if isinstance(f.default, tuple):
            return tuple(float(v) for v in val.split(","))
        return float(val)
    except ValueError as exc:
        raise ValueError(f"{where}: cannot parse {val!r} for {f.name}") from exc


def dump_params(obj) -> str:
    lines = []
    for f in fields(obj):
        val = getattr(obj, f.name)
        text = ", ".join(repr(float(v)) for v in val) if isinstance(val, tuple) else repr(float(val))
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"
