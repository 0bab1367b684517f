class QGyroError(Exception):
    """Base class for library errors."""


class ValidationError(QGyroError, ValueError):
    """An input violates the precondition of an operation."""


class DimensionError(ValidationError):
    pass


class ToleranceError(QGyroError, ArithmeticError):
    """A numerical invariant was breached beyond its tolerance."""


class MemoryBudgetError(QGyroError, MemoryError):
    pass
