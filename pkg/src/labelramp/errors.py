"""Exception types shared across the package.

The CLI maps these to exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class ConfigError(ValueError):
    """Invalid configuration value or combination of values."""


class DataError(ValueError):
    """Missing, corrupt, truncated, or otherwise unusable input data."""


class NumericError(ArithmeticError):
    """Non-finite values encountered during computation."""


class ShapeError(ValueError):
    """Array shape or structure incompatible with the requested operation."""
