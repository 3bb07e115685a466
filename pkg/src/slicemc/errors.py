"""Exception families shared across the package.

The command line driver maps each family to a distinct exit code, so new
error types should subclass one of these rather than raising bare
exceptions.
"""

from __future__ import annotations


class SliceMCError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(SliceMCError):
    """Invalid input text: expression syntax, manifold files, bad config.

    Carries ``line`` and ``column`` (1-based) when the location is known.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        self.message = message
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            message = f"{where}: {message}"
        super().__init__(message)


class EvaluationDomainError(SliceMCError):
    """A scalar expression was evaluated outside its real domain.

    ``point`` holds the offending coordinates so callers can report where
    the integrand blew up instead of propagating silent NaNs.
    """

    def __init__(self, message: str, point=None):
        self.point = point
        if point is not None:
            message = f"{message} at point {list(point)}"
        super().__init__(message)


class SolverError(SliceMCError):
    """Numerical solver breakdown: non-square systems, all paths lost,
    rank-deficient Jacobians, inconsistent degree bounds."""


class SamplingError(SliceMCError):
    """Rejection sampling failed: invalid bounds (acceptance probability
    above one) or acceptance rate below the configured floor."""
