"""
Exception hierarchy shared by the library and the command line.
Each class carries the process exit code the CLI maps it to.
"""


class RecastError(Exception):
    """Base class for all errors raised by this package."""
    exit_code: int = 1


class ConfigError(RecastError, ValueError):
    """Invalid, unknown or inconsistent configuration."""
    exit_code = 2


class DataError(RecastError, ValueError):
    """Malformed or incompatible input data."""
    exit_code = 3


class DomainError(DataError):
    """Parameters outside the domain of a distribution or closed form."""


class NumericalError(RecastError, RuntimeError):
    """A numerical routine failed (non-finite values, no convergence, singular systems)."""
    exit_code = 4


class QuadratureError(NumericalError):
    """Adaptive quadrature failed; keeps the best estimate reached so far."""

    def __init__(self, message: str, value: float = float("nan"), err_est: float = float("nan")):
        super().__init__(f"{message} (best estimate={value!r}, error estimate={err_est!r})")
        self.value = value
        self.err_est = err_est
