"""Goodput of a deadline-constrained overwrite queue under packet skipping
and opportunistic XOR network coding."""

from .core import (
    ClearanceExpectations,
    DomainError,
    GoodputReport,
    ModelParams,
    StateDistribution,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "ClearanceExpectations",
    "DomainError",
    "GoodputReport",
    "ModelParams",
    "StateDistribution",
    "validate",
]
