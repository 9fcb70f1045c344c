"""Exception types shared across the package."""


class DataError(ValueError):
    """Raised when input data violates a structural requirement."""


class NumericalError(RuntimeError):
    """Raised when a linear-algebra or sampling step fails beyond recovery."""
