"""Exception family. Each subclasses a builtin so callers can catch broadly."""


class ShapeError(ValueError):
    """Operands of an op have incompatible shapes."""


class NumericError(ArithmeticError):
    """An op produced NaN or Inf."""


class ConfigError(ValueError):
    """A configuration value is invalid or inconsistent."""


class FormatError(ValueError):
    """A checkpoint, cache or WAV file could not be decoded."""


class DataError(ValueError):
    """A dataset on disk is missing pieces or has an empty class."""
