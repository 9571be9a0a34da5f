"""Exception types shared across the library.

Every error raised by the package derives from :class:`SchroGspError`, so
callers can catch library failures without also swallowing programming
errors.  The subclasses separate the failure modes that calling code is
expected to distinguish: malformed input files, violated preconditions,
signals with no usable mass, and numerical breakdown.
"""

from __future__ import annotations


class SchroGspError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(SchroGspError, ValueError):
    """Malformed input file.  Carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ContractError(SchroGspError, ValueError):
    """A documented precondition or interface contract was violated."""


class DegenerateSignalError(SchroGspError, ValueError):
    """Signal (or windowed signal) mass is too small to normalize."""


class DegenerateFeatureError(SchroGspError, ValueError):
    """A feature column carries no usable variation."""


class NumericalError(SchroGspError, ArithmeticError):
    """Numerical failure: overflow, NaN, or a residual above its bound."""


class DivergedError(NumericalError):
    """Optimization hit a non-finite objective.

    ``last_good`` holds the most recent iterate with a finite objective so
    callers can inspect or resume from it.
    """

    def __init__(self, message: str, last_good=None):
        super().__init__(message)
        self.last_good = last_good


class SizeError(SchroGspError, ValueError):
    """Problem size exceeds a hard bound (dense-oracle feasibility)."""
