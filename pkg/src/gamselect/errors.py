"""Exception types shared across the package."""


class GamSelectError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameterError(GamSelectError, ValueError):
    """A parameter is outside its legal domain (e.g. a nonpositive scale)."""


class DegenerateDataError(GamSelectError, ValueError):
    """A data column is unusable (constant, too few distinct values, ...)."""


class CapacityError(GamSelectError, MemoryError):
    """Estimated working-set size exceeds the configured limit."""


class OutOfRangeError(GamSelectError, ValueError):
    """An evaluation point lies outside the training range."""


class InvalidIndexError(GamSelectError, IndexError):
    """A block or predictor index is out of range."""


class NumericalError(GamSelectError, RuntimeError):
    """A numerical operation failed (factorization, non-finite value, ...).

    Carries enough context (sweep/cycle index, offending quantity) to locate
    the failure.
    """

    def __init__(self, message, *, where=None, quantity=None):
        if where is not None:
            message = f"{message} (at {where})"
        if quantity is not None:
            message = f"{message} [offending quantity: {quantity}]"
        super().__init__(message)
        self.where = where
        self.quantity = quantity


class InternalConsistencyError(NumericalError):
    """An invariant that should hold by construction was violated.

    Raised e.g. when a coordinate-ascent cycle decreases the objective beyond
    floating-point slack, which signals an update-formula bug rather than a
    data problem.
    """
