"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ForbiddenRayError(ValueError):
    """A ray direction is not admissible somewhere along its path."""


class UnsupportedError(ValueError):
    """A configuration or kernel order that is deliberately not supported."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class DataError(ValueError):
    """Malformed or invalid input data."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (non-finite data, bracket failure, ...)."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index
