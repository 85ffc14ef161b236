"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class DegmagError(Exception):
    """Base class."""


class DomainError(DegmagError, ValueError):
    """Input outside the domain where the operation is meaningful."""


class EllipticityError(DegmagError, ValueError):
    """A principal coefficient is not positive on the grid."""


class DimensionError(DegmagError, ValueError):
    """Requested more eigenvalues than the matrix dimension."""


class InputError(DegmagError, ValueError):
    """Non-finite or malformed matrix data."""


class NumericalFailure(DegmagError, ArithmeticError):
    def __init__(self, message: str, index: int | None = None):
        super().__init__(message if index is None else f"{message} (index {index})")
        self.index = index


class DiscrepancyError(DegmagError, AssertionError):
    """An exact identity failed; carries both sides."""

    def __init__(self, what: str, computed, expected):
        super().__init__(f"{what}: computed {computed}, expected {expected}")
        self.computed = computed
        self.expected = expected


class QuadratureError(DegmagError, ArithmeticError):
    def __init__(self, message: str, worst_cell=None):
        super().__init__(f"{message}; worst cell {worst_cell}")
        self.worst_cell = worst_cell


class CapExceeded(DegmagError, ValueError):
    """Problem size above the configured cap."""
