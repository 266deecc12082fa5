"""Exception types raised by the filters, scenarios and pipeline."""

from __future__ import annotations


class KalmanBenchError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(KalmanBenchError, ValueError):
    """Operand shapes do not conform."""


class NotPositiveDefiniteError(KalmanBenchError, ArithmeticError):
    """Cholesky factorization hit a non-positive pivot.

    Attributes:
        pivot: zero-based index of the offending diagonal entry.
        value: the pivot value that was encountered.
    """

    def __init__(self, pivot: int, value: float, message: str | None = None):
        self.pivot = pivot
        self.value = value
        super().__init__(message or f"matrix is not positive definite: pivot {pivot} = {value!r}")


class DegenerateInnovationError(KalmanBenchError, ArithmeticError):
    """The innovation covariance S could not be factorized."""


class DivergenceError(KalmanBenchError, ArithmeticError):
    """A propagated state became non-finite."""

    def __init__(self, message: str, state=None):
        self.state = state
        super().__init__(message)


class SingularGeometryError(KalmanBenchError, ValueError):
    """A scenario was evaluated at a singular point (r = 0, target on the radar)."""


class IncompatibleFilterError(KalmanBenchError, ValueError):
    """The requested filter cannot run on the requested scenario."""


class FilterStepError(KalmanBenchError):
    """A filter step failed; carries the measurement epoch index."""

    def __init__(self, epoch: int, cause: Exception):
        self.epoch = epoch
        self.cause = cause
        super().__init__(f"filter failed at epoch {epoch}: {cause}")
