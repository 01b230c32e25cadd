"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataValidationError
and ShapeError -> 3, OS/IO failures -> 4.
"""


class ShapeError(ValueError):
    """An array has the wrong shape or width for the requested operation."""


class DataValidationError(ValueError):
    """An input file or dataset violates a documented invariant."""


class ConfigError(ValueError):
    """A configuration object or flag combination is invalid."""
