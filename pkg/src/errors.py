from __future__ import annotations
from typing import Any, Sequence


class InvariantSetError(Exception):
    """Base class for every error raised by the package."""

    exit_code: int = 1


class ProblemError(InvariantSetError, ValueError):
    """Invalid problem data: dimensions, degrees, origin outside the set, file schema."""

    exit_code = 2


class BoxValidationError(InvariantSetError):
    """A point of the constraint set was found outside the supplied state box."""

    exit_code = 8

    def __init__(self, message: str, witness: Sequence[float]):
        super().__init__(message)
        self.witness = list(witness)


class AssumptionError(InvariantSetError):
    """The switching system could not be certified asymptotically stable."""

    exit_code = 3

    def __init__(self, message: str, bounds: Any = None):
        super().__init__(message)
        self.bounds = bounds


class NonConvergenceError(InvariantSetError):
    """The set iteration hit its cap; the trace so far is attached."""

    exit_code = 4

    def __init__(self, message: str, trace: list):
        super().__init__(message)
        self.trace = trace


class LPSolverError(InvariantSetError):
    exit_code = 6


class SDPSolverError(InvariantSetError):
    exit_code = 6


class EnumerationBudgetError(InvariantSetError, ValueError):
    """Too many matrix products or switching sequences to enumerate."""

    exit_code = 2


class ResultMismatchError(InvariantSetError):
    """A result file does not belong to the given problem file."""

    exit_code = 7
