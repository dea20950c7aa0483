"""Exception types shared across the package.

The CLI maps these onto stable exit codes: ConfigError -> 2,
ShapeError -> 3, I/O failures -> 4.
"""


class ConfigError(ValueError):
    """Invalid configuration: odd channel counts, stripe widths that do not
    divide the spatial dims, unknown config keys, even depth-wise kernels."""


class ShapeError(ValueError):
    """Operands whose shapes cannot be combined. The message names both
    shapes so the failing call site is obvious."""


class UsageError(RuntimeError):
    """API misuse that is not a shape problem, e.g. asking for gradients of
    a non-scalar tape root."""


class NumericError(ArithmeticError):
    """A kernel or oracle produced a non-finite value."""
