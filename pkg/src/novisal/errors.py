"""Exception types shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 1, data problems with 2, numerical failures with 3.
"""


class NovisalError(Exception):
    """Base class for package-specific errors."""


class ConfigError(NovisalError):
    """Bad command-line usage or a malformed/unknown configuration key."""


class DataError(NovisalError):
    """Missing, malformed, or inconsistent input data."""


class NumericalError(NovisalError):
    """Numerical failure, e.g. a non-finite training loss."""
