"""Exception types shared across the package."""


class AwtrError(Exception):
    """Base class for package errors."""


class DimensionError(AwtrError, ValueError):
    """Shapes or lengths of inputs are inconsistent."""


class ParameterError(AwtrError, ValueError):
    """A scalar parameter is outside its allowed range."""


class DegenerateInputError(AwtrError, ValueError):
    """Input has no usable variation (e.g. constant observed values)."""


class NumericError(AwtrError, ArithmeticError):
    """A numerical routine produced or received non-finite values."""


class ConfigurationError(AwtrError, ValueError):
    """An experiment or cross-validation configuration is invalid."""
