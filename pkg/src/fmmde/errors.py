"""Exception types shared across the package."""


class InputError(ValueError):
    """Malformed input data or configuration (CLI exit code 2)."""


class NumericError(RuntimeError):
    """Numerical failure during estimation (CLI exit code 1)."""
