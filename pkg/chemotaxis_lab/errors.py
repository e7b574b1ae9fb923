"""
Exception hierarchy for chemotaxis-lab.

The CLI maps each family to an exit code: configuration and domain problems
exit with 2, solver failures with 3, failed diagnostics with 4.
"""
from typing import Optional


class LabError(Exception):
    """Base class for every error raised by chemotaxis-lab."""

    exit_code = 1


class DomainError(LabError, ValueError):
    """A parameter lies outside the mathematical domain of an operation."""

    exit_code = 2


class ConfigError(LabError, ValueError):
    """
    Invalid run configuration.

    Attributes:
        field (str): Dotted path of the offending config field
    """

    exit_code = 2

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class HypothesisViolationError(ConfigError):
    """A requested check needs a theorem hypothesis the run does not satisfy."""


class MassCaptureError(ConfigError):
    """The grid box misses too much of the mollified initial mass."""

    def __init__(self, captured: float, required: float):
        self.captured = captured
        self.required = required
        super().__init__(
            "grid.L",
            f"box captures a fraction {captured:.12g} of the mass, "
            f"at least {required:.12g} is required",
        )


class SolverError(LabError, RuntimeError):
    """Runtime failure while advancing a solver."""

    exit_code = 3


class CFLViolationError(SolverError):
    """The time step exceeds the stability bound of the finite-volume scheme."""

    def __init__(self, dt: float, limit: float, face_speed: float):
        self.dt = dt
        self.limit = limit
        self.face_speed = face_speed
        super().__init__(
            f"time step {dt:.6g} exceeds the CFL bound {limit:.6g} "
            f"(max face speed {face_speed:.6g})"
        )


class NegativeDensityError(SolverError):
    """A cell value dropped below the negativity tolerance."""

    def __init__(self, min_value: float, t: Optional[float] = None):
        self.min_value = min_value
        self.t = t
        where = f" at t={t:.6g}" if t is not None else ""
        super().__init__(f"density reached {min_value:.3e}{where}")


class BoundViolationError(LabError, AssertionError):
    """A certified kernel or drift bound failed while bound checks are enabled."""

    exit_code = 3


class DiagnosticFailure(LabError):
    """One or more hard diagnostic checks failed."""

    exit_code = 4

    def __init__(self, failed):
        self.failed = list(failed)
        super().__init__(f"failed checks: {', '.join(self.failed)}")
