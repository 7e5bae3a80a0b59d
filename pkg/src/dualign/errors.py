"""Exception hierarchy shared across the package.

The CLI maps these onto stable exit codes: ConfigError -> 1,
NumericsError -> 2, FormatError -> 3.
"""


class DualignError(Exception):
    pass


class ShapeError(DualignError):
    """Mismatched or degenerate array shapes."""


class NumericsError(DualignError):
    """Non-finite values, invalid distributions, or out-of-range parameters."""


class ConfigError(DualignError):
    """Bad configuration keys or values."""


class FormatError(DualignError):
    """Corrupt or unsupported on-disk files."""
