class DataError(ValueError):
    """Raised when input data violates the CSV/data contract."""


class InvariantError(RuntimeError):
    """Raised when an internal invariant check fails after a computation."""
