"""Exception types shared across the package."""

from __future__ import annotations


class LineupGpError(Exception):
    """Base class for all errors raised by this package."""


class DataError(LineupGpError):
    """Invalid input data: malformed files, bad records, unknown ids."""


class NumericalError(LineupGpError):
    """Numerical failure: non-convergence, conditioning, zero-probability loss."""


class UsageError(LineupGpError):
    """Bad command-line flags or configuration."""
