"""Run configuration shared by the simulation pipeline and the CLI."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from typing import Optional

SCENARIOS = ("freefall", "freefall_drag", "lotka_volterra", "reentry")
FILTERS = ("bkf", "ekf", "ukf")
LINEAR_SCENARIOS = ("freefall",)

# scenario -> (dt in s, number of measurement epochs)
DEFAULT_TIMING = {
    "freefall": (0.01, 1000),
    "freefall_drag": (0.01, 1000),
    "lotka_volterra": (0.01, 1000),
    "reentry": (0.1, 2000),
}
DEFAULT_FILTER = {"freefall": "bkf", "freefall_drag": "ekf", "lotka_volterra": "ekf", "reentry": "ukf"}


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one simulate/filter run.

    ``None`` fields fall back to the scenario defaults. ``process_sigmas`` and
    ``meas_sigmas`` override the noise standard deviations of the scenario;
    ``zero_noise`` switches all injected noise off while the filter keeps its
    nominal covariances.
    """

    scenario: str = "freefall"
    filter: Optional[str] = None
    seed: int = 0
    dt: Optional[float] = None
    duration: Optional[float] = None
    observe: str = "full"
    alpha: float = 1e-3
    beta: float = 2.0
    kappa: float = 0.0
    process_sigmas: Optional[tuple] = None
    meas_sigmas: Optional[tuple] = None
    zero_noise: bool = False
    inner_steps: int = 10
    reuse_points: bool = False
    cross_cov: str = "printed"
    mu: float = 0.1  # drag rate for freefall_drag, 1/s
    param_file: Optional[str] = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario: unknown value {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        if self.filter is not None and self.filter not in FILTERS:
            raise ValueError(f"filter: unknown value {self.filter!r}; choose from {', '.join(FILTERS)}")
        if self.observe not in ("full", "height_only"):
            raise ValueError(f"observe: must be 'full' or 'height_only', got {self.observe!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha: must lie in (0, 1], got {self.alpha}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt: must be positive, got {self.dt}")
        if self.duration is not None and not self.duration > 0:
            raise ValueError(f"duration: must be positive, got {self.duration}")
        if self.cross_cov not in ("printed", "consistent"):
            raise ValueError(f"cross_cov: must be 'printed' or 'consistent', got {self.cross_cov!r}")
        if self.inner_steps < 1:
            raise ValueError("inner_steps: must be at least 1")
        if self.scenario == "freefall_drag" and not self.mu > 0:
            raise ValueError("mu: freefall_drag needs a positive drag rate")

    @property
    def filter_kind(self) -> str:
        return self.filter or DEFAULT_FILTER[self.scenario]

    @property
    def step(self) -> float:
        return self.dt if self.dt is not None else DEFAULT_TIMING[self.scenario][0]

    @property
    def n_epochs(self) -> int:
        if self.duration is None:
            return DEFAULT_TIMING[self.scenario][1]
        return int(round(self.duration / self.step))

    def check_compatible(self) -> None:
        from kalman_bench.errors import IncompatibleFilterError

        if self.filter_kind == "bkf" and self.scenario not in LINEAR_SCENARIOS:
            raise IncompatibleFilterError(
                f"filter: bkf needs a linear scenario ({', '.join(LINEAR_SCENARIOS)}), got {self.scenario}"
            )

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("process_sigmas", "meas_sigmas"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"{sorted(unknown)[0]}: unknown configuration key")
        d = dict(d)
        for key in ("process_sigmas", "meas_sigmas"):
            if d.get(key) is not None:
                d[key] = tuple(float(v) for v in d[key])
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

