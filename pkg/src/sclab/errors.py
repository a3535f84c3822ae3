"""Exception types shared across the package."""


class SCLabError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SCLabError, ValueError):
    """Rejected input: bad digit, out-of-range point, level mismatch."""


class CapacityError(SCLabError):
    """Requested object would exceed a configured size cap."""


class SolverError(SCLabError):
    """Iterative solve did not reach the requested tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularSystemError(SCLabError):
    """Free nodes without a path to any pinned node."""
