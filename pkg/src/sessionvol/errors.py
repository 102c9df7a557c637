"""Exception hierarchy shared by all sessionvol modules.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericalError -> 4.
"""


class ToolkitError(Exception):
    """Base class for all sessionvol errors."""


class ConfigError(ToolkitError):
    """Invalid configuration, arguments, or simulator setup."""


class DataError(ToolkitError):
    """Malformed, inconsistent, or insufficient input data."""


class NumericalError(ToolkitError):
    """Numerical failure (singular system, non-finite values)."""
