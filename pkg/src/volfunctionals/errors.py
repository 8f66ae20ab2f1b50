"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ``ConfigError`` -> 2, ``DataError`` -> 3,
``NumericalError`` / ``DomainError`` -> 4.
"""


class VolFuncError(Exception):
    """Base class for all package errors."""

    stage = None


class ConfigError(VolFuncError, ValueError):
    """Invalid configuration, tuning plan or function specification."""


class DataError(VolFuncError, ValueError):
    """Malformed or unusable observation data."""


class DimensionError(DataError):
    """Array shapes do not match the expected dimension."""


class DomainError(VolFuncError, ValueError):
    """A test function was evaluated outside the set where it is smooth."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NumericalError(VolFuncError, ArithmeticError):
    """Non-finite result or failed internal guard."""
