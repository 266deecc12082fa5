"""Truth generation, noisy measurement synthesis and filter execution."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from kalman_bench import scenarios as sc
from kalman_bench.bkf import LinearModel, StateEstimate, bkf_correct, bkf_predict
from kalman_bench.config import RunConfig
from kalman_bench.ekf import NonlinearModel, ekf_correct, ekf_predict
from kalman_bench.errors import DimensionError, FilterStepError, KalmanBenchError
from kalman_bench.linalg import as_mat, cholesky
from kalman_bench.ode import rk4_integrate, rk4_step
from kalman_bench.ukf import UTParams, ukf_correct, ukf_predict

__all__ = [
    "RngStream",
    "Scenario",
    "TrajectoryRecord",
    "build_scenario",
    "rk4_step",
    "run_filter",
    "sample_gaussian",
    "simulate",
]


class RngStream:
    """Seeded source of standard normal draws.

    Backed by numpy's PCG64 bit generator and ``Generator.standard_normal``
    (ziggurat), whose output for a given seed is fixed by numpy's stream
    compatibility policy and independent of platform.
    """

    ALGORITHM = "PCG64+standard_normal"

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    @property
    def algorithm(self) -> str:
        return f"{self.ALGORITHM} (numpy {np.__version__})"

    def standard_normal(self, n: int) -> np.ndarray:
        return self._gen.standard_normal(n)


def gaussian_factor(cov) -> np.ndarray:
    """Cholesky factor of a PSD covariance; zero-variance directions give zero columns."""
    return cholesky(as_mat(cov, "cov"), allow_semidefinite=True)


def sample_gaussian(cov, rng: RngStream) -> np.ndarray:
    """One zero-mean draw with covariance ``cov``."""
    low = gaussian_factor(cov)
    return low @ rng.standard_normal(low.shape[0])


# ------------------------------------------------------------------ records


@dataclass
class TrajectoryRecord:
    """Time series of one run.

    ``truth`` and ``clean`` (the noise-free measurement of the truth) may be
    missing when measurements come from outside. Filter outputs are filled in
    by :func:`run_filter`: ``innovations`` are z - z_pred before the update,
    ``residuals`` are z - h(x_post) after it and ``fitted`` is h(x_post).
    """

    times: np.ndarray
    measurements: np.ndarray
    state_names: tuple
    meas_names: tuple
    truth: Optional[np.ndarray] = None
    clean: Optional[np.ndarray] = None
    x_hat: Optional[np.ndarray] = None
    p: Optional[np.ndarray] = None
    innovations: Optional[np.ndarray] = None
    residuals: Optional[np.ndarray] = None
    fitted: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        n = self.times.size
        if n and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        for name in ("measurements", "truth", "clean", "x_hat", "p", "innovations", "residuals", "fitted"):
            val = getattr(self, name)
            if val is None:
                continue
            val = np.asarray(val, dtype=float)
            if val.ndim == 1:
                val = val[:, None]
            if val.shape[0] != n:
                raise DimensionError(f"{name} has {val.shape[0]} rows but there are {n} epochs")
            setattr(self, name, val)

    def __len__(self) -> int:
        return self.times.size

    @property
    def p_diag(self) -> Optional[np.ndarray]:
        return None if self.p is None else np.diagonal(self.p, axis1=1, axis2=2).copy()

    def estimates(self) -> list[StateEstimate]:
        return [StateEstimate(x, p, k + 1, t) for k, (x, p, t) in enumerate(zip(self.x_hat, self.p, self.times))]


# ---------------------------------------------------------------- scenarios


@dataclass
class Scenario:
    """A fully parameterized scenario ready to simulate and filter."""

    name: str
    dt: float
    n_epochs: int
    state_names: tuple
    meas_names: tuple
    meas_sigmas: np.ndarray  # nominal, used by the filter and for chi-squared
    initial: StateEstimate
    truth_fn: Callable[[RngStream], np.ndarray]
    measure: Callable[[np.ndarray], np.ndarray]  # noise-free, vectorized
    sim_meas_cov: np.ndarray
    nonlinear: NonlinearModel
    linear: Optional[Callable[[float], tuple[LinearModel, np.ndarray]]] = None
    params: tuple = ()


def _sigmas(override, default, n: int, what: str) -> tuple:
    vals = tuple(default) if override is None else tuple(float(v) for v in override)
    if len(vals) == 1 and n > 1:
        vals = vals * n
    if len(vals) != n:
        raise ValueError(f"{what}: expected {n} values, got {len(vals)}")
    if min(vals) < 0:
        raise ValueError(f"{what}: standard deviations must be non-negative")
    return vals


def _file_params(config: RunConfig, *classes) -> list:
    if config.param_file:
        return sc.load_params(config.param_file, *classes)
    return [cls() for cls in classes]


def _freefall(config: RunConfig) -> Scenario:
    (base,) = _file_params(config, sc.FreeFallParams)
    mu = config.mu if config.scenario == "freefall_drag" else base.mu
    q = _sigmas(config.process_sigmas, base.q_sigmas, 2, "process_sigmas")
    r = _sigmas(config.meas_sigmas, base.r_sigmas, 2, "meas_sigmas")
    p = replace(base, mu=mu, q_sigmas=q, r_sigmas=r)
    dt, n = config.step, config.n_epochs
    h = sc.freefall_h(config.observe)
    sim_q = np.zeros((2, 2)) if config.zero_noise else np.diag(np.square(q))
    phi = sc.freefall_transition_matrix(p.mu, dt)

    def truth(rng: RngStream) -> np.ndarray:
        # closed form plus the propagated process-noise deviation
        low = gaussian_factor(sim_q)
        dev = np.zeros(2)
        rows = np.empty((n, 2))
        for k in range(n):
            dev = phi @ dev + low @ rng.standard_normal(2)
            rows[k] = np.array(sc.freefall_exact(p, (k + 1) * dt)) + dev
        return rows

    linear = None
    if p.mu == 0.0:
        linear = lambda step: sc.freefall_linear_model(p, step, config.observe)  # noqa: E731
    k = h.shape[0]
    meas_cov = np.diag(np.square(r[:k]))
    return Scenario(
        name=config.scenario,
        dt=dt,
        n_epochs=n,
        state_names=("x", "v"),
        meas_names=("x", "v")[:k],
        meas_sigmas=np.array(r[:k]),
        initial=StateEstimate(np.array([p.x0, p.v0]), np.diag(np.square(r))),
        truth_fn=truth,
        measure=lambda x: np.asarray(x) @ h.T,
        sim_meas_cov=np.zeros((k, k)) if config.zero_noise else meas_cov,
        nonlinear=sc.freefall_nonlinear_model(p, config.observe),
        linear=linear,
        params=(p,),
    )


def _lotka_volterra(config: RunConfig) -> Scenario:
    (base,) = _file_params(config, sc.LVParams)
    (q,) = _sigmas(config.process_sigmas, (base.q_sigma,), 1, "process_sigmas")
    (r,) = _sigmas(config.meas_sigmas, (base.r_sigma,), 1, "meas_sigmas")
    p = replace(base, q_sigma=q, r_sigma=r)
    dt, n, inner = config.step, config.n_epochs, config.inner_steps
    sim_q = np.zeros((2, 2)) if config.zero_noise else np.eye(2) * q**2 * dt

    def truth(rng: RngStream) -> np.ndarray:
        low = gaussian_factor(sim_q)
        x = np.array([p.x0, p.y0])
        rows = np.empty((n, 2))
        for k in range(n):
            x = rk4_integrate(lambda s: sc.lv_derivatives(s, p), x, dt, inner) + low @ rng.standard_normal(2)
            rows[k] = x
        return rows

    return Scenario(
        name=config.scenario,
        dt=dt,
        n_epochs=n,
        state_names=("prey", "predator"),
        meas_names=("prey", "predator"),
        meas_sigmas=np.array([r, r]),
        initial=StateEstimate(np.array([p.x0, p.y0]), np.eye(2) * r**2),
        truth_fn=truth,
        measure=lambda x: np.asarray(x, dtype=float).copy(),
        sim_meas_cov=np.zeros((2, 2)) if config.zero_noise else np.eye(2) * r**2,
        nonlinear=sc.lv_model(p, dt),
        params=(p,),
    )


def _reentry(config: RunConfig) -> Scenario:
    base, init = _file_params(config, sc.ReentryParams, sc.ReentryInit)
    if config.dt is not None:
        base = replace(base, sample_rate=1.0 / config.dt)
    d_sig, th_sig = _sigmas(config.meas_sigmas, (base.meas_sigma_d, base.meas_sigma_theta), 2, "meas_sigmas")
    p = replace(base, meas_sigma_d=d_sig, meas_sigma_theta=th_sig)
    if config.process_sigmas is not None:
        q_sim = _sigmas(config.process_sigmas, None, 3, "process_sigmas")
        init = replace(init, q_sim_diag=(0.0, 0.0) + tuple(s * s for s in q_sim))
    dt, n, inner = p.dt, config.n_epochs, config.inner_steps
    h = dt / inner
    accel_cov = np.zeros((3, 3)) if config.zero_noise else init.q_sim[2:, 2:]

    def truth(rng: RngStream) -> np.ndarray:
        # accelerations are held constant over each inner RK4 step
        low = gaussian_factor(accel_cov)
        x = np.array(init.x0_true, dtype=float)
        rows = np.empty((n, 5))
        for k in range(n):
            for _ in range(inner):
                q = low @ rng.standard_normal(3)
                x = rk4_step(lambda s: sc.reentry_derivatives(s, p, q), x, h)
            rows[k] = x
        return rows

    return Scenario(
        name=config.scenario,
        dt=dt,
        n_epochs=n,
        state_names=("x1", "x2", "x3", "x4", "x5"),
        meas_names=("d", "theta"),
        meas_sigmas=np.array([d_sig, th_sig]),
        initial=StateEstimate(np.array(init.x0_est, dtype=float), np.diag(init.p0_diag)),
        truth_fn=truth,
        measure=lambda x: sc.radar_measure(x, p),
        sim_meas_cov=np.zeros((2, 2)) if config.zero_noise else p.r_matrix,
        nonlinear=sc.reentry_model(p, init, inner),
        params=(p, init),
    )


_BUILDERS = {
    "freefall": _freefall,
    "freefall_drag": _freefall,
    "lotka_volterra": _lotka_volterra,
    "reentry": _reentry,
}


def build_scenario(config: RunConfig) -> Scenario:
    return _BUILDERS[config.scenario](config)


# --------------------------------------------------------------- pipeline


def simulate(scenario: Scenario, rng: RngStream) -> TrajectoryRecord:
    """Truth series followed by noisy measurements, one row per epoch.

    All truth draws are taken before any measurement draw.
    """
    truth = scenario.truth_fn(rng)
    if not np.all(np.isfinite(truth)):
        raise KalmanBenchError("truth integration diverged")
    clean = np.asarray(scenario.measure(truth), dtype=float)
    low = gaussian_factor(scenario.sim_meas_cov)
    noise = np.array([low @ rng.standard_normal(low.shape[0]) for _ in range(len(truth))])
    times = scenario.dt * np.arange(1, scenario.n_epochs + 1)
    return TrajectoryRecord(
        times=times,
        measurements=clean + noise,
        state_names=scenario.state_names,
        meas_names=scenario.meas_names,
        truth=truth,
        clean=clean,
        meta={"seed": rng.seed, "rng": rng.algorithm, "scenario": scenario.name},
    )


def run_filter(record: TrajectoryRecord, scenario: Scenario, kind: str, config: RunConfig) -> TrajectoryRecord:
    """Alternate prediction and correction over every measurement epoch.

    Any step failure is re-raised as :class:`FilterStepError` carrying the
    zero-based epoch index.
    """
    if kind == "bkf" and scenario.linear is None:
        from kalman_bench.errors import IncompatibleFilterError

        raise IncompatibleFilterError(f"filter: bkf needs a linear scenario, got {scenario.name}")
    if kind not in ("bkf", "ekf", "ukf"):
        raise ValueError(f"filter: unknown kind {kind!r}")
    params = UTParams(config.alpha, config.beta, config.kappa)
    model = scenario.nonlinear
    linear_cache: dict = {}

    n, dim = len(record), scenario.initial.n
    k_meas = record.measurements.shape[1]
    x_hat = np.empty((n, dim))
    covs = np.empty((n, dim, dim))
    innov = np.empty((n, k_meas))
    resid = np.empty((n, k_meas))
    fitted = np.empty((n, k_meas))

    est = scenario.initial
    t_prev = 0.0
    for i, (t, z) in enumerate(zip(record.times, record.measurements)):
        dt = float(t - t_prev)
        try:
            if kind == "bkf":
                if dt not in linear_cache:
                    linear_cache[dt] = scenario.linear(dt)
                lin, u = linear_cache[dt]
                rep = bkf_correct(bkf_predict(est, lin, u, dt), lin, z)
            elif kind == "ekf":
                rep = ekf_correct(ekf_predict(est, model, None, dt), model, z)
            else:
                pred, prop = ukf_predict(est, model, None, dt, params)
                rep = ukf_correct(pred, prop, model, z, params, config.reuse_points, config.cross_cov)
        except KalmanBenchError as exc:
            raise FilterStepError(i, exc) from exc
        est = replace(rep.posterior, t=float(t))
        x_hat[i] = est.x_hat
        covs[i] = est.p
        innov[i] = rep.residual
        fitted[i] = scenario.measure(est.x_hat)
        resid[i] = z - fitted[i]
        t_prev = t

    meta = dict(record.meta, filter=kind, alpha=config.alpha, beta=config.beta, kappa=config.kappa)
    return replace(record, x_hat=x_hat, p=covs, innovations=innov, residuals=resid, fitted=fitted, meta=meta)


def run_pipeline(config: RunConfig) -> tuple[Scenario, TrajectoryRecord]:
    """Simulate and filter one configuration in memory."""
    config.check_compatible()
    scenario = build_scenario(config)
    record = simulate(scenario, RngStream(config.seed))
    return scenario, run_filter(record, scenario, config.filter_kind, config)
