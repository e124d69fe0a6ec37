"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class FormatError(ValueError):
    """An input file does not match its declared on-disk format."""


class NumericsError(ArithmeticError):
    """A computation produced or received non-finite values."""


class DegenerateCovariance(ArithmeticError):
    """The pooled covariance cannot support a precision estimate."""


class ConfigError(ValueError):
    """Experiment configuration is invalid or self-contradictory."""


class IoError(OSError):
    """A report or trace file could not be written."""
