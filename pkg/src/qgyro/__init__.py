"""Degradation of a spin-l quantum reference frame used to measure spin-1/2 particles."""

__version__ = "0.1.0"

from .errors import DimensionError, MemoryBudgetError, QGyroError, ToleranceError, ValidationError
from .spin import ReferenceGeometry, SourceState

__all__ = [
    "__version__",
    "DimensionError",
    "MemoryBudgetError",
    "QGyroError",
    "ReferenceGeometry",
    "SourceState",
    "ToleranceError",
    "ValidationError",
]
