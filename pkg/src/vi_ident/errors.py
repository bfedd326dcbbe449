"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Raised for invalid mesh/experiment/driver configuration."""


class SolverError(RuntimeError):
    """Raised when an iterative solver exhausts its iteration cap.

    Carries the last residual so callers can report how close the run got.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual
