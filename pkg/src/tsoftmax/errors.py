"""Exception hierarchy shared by the library and the CLI."""


class TSoftmaxError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(TSoftmaxError, ValueError):
    pass


class DomainError(TSoftmaxError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class NonFiniteError(TSoftmaxError, FloatingPointError):
    """A forward computation produced NaN or Inf."""


class ConfigError(TSoftmaxError, ValueError):
    pass


class DataFormatError(TSoftmaxError, ValueError):
    """Malformed or inconsistent input files (IDX, checkpoints)."""
