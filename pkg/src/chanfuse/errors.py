"""Exception hierarchy shared across the package.

The CLI maps each family to a distinct exit code.
"""


class ChanfuseError(Exception):
    """Base class for all package errors."""


class ConfigError(ChanfuseError, ValueError):
    pass


class DataError(ChanfuseError, ValueError):
    pass


class LeakageError(ChanfuseError):
    """Test-subject data reached a training stage it must not see."""


class NumericError(ChanfuseError, FloatingPointError):
    pass


class ShapeError(ConfigError):
    pass


class InvalidDimensionError(ShapeError):
    pass


class DimensionMismatchError(ShapeError):
    pass


class DomainError(ConfigError):
    pass


class ChannelCountError(ShapeError):
    pass


class StateError(ChanfuseError, RuntimeError):
    pass


class FormatError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class CurationError(DataError):
    pass


class SchemeError(ConfigError):
    pass


class UnsupportedRateError(ConfigError):
    pass
