"""Exception types shared across the package.

Every failure mode the solver can report maps to one of these classes, so
callers (and the command line front end) can branch on category rather than
on message text.
"""

from __future__ import annotations


class SaddlePassError(RuntimeError):
    """Base class for all package errors."""


class UsageError(SaddlePassError):
    """Bad arguments: dimension mismatches, invalid parameters, malformed input."""


class ExprParseError(UsageError):
    """Expression text could not be parsed; carries the offending token."""

    def __init__(self, message: str, token: str | None = None, position: int | None = None):
        super().__init__(message)
        self.token = token
        self.position = position


class TopologyError(SaddlePassError):
    """The separating set does not cut the path space the way the method needs."""


class PreconditionError(SaddlePassError):
    """A stated precondition of an operation failed (e.g. the scale eps is too large)."""


class SetEmptyError(SaddlePassError):
    """No admissible sample of the level-restricted separating set was found."""


class WindowError(SaddlePassError):
    """The near-max set of a path touches the crossing-window endpoints."""


class SlopeParadoxError(SaddlePassError):
    """Backtracking found no acceptable step although every near-max point had a
    certified descent direction.  On a continuum path such a step exists, so the
    grid is too coarse; callers refine and retry."""

    def __init__(self, message: str, h_last: float | None = None):
        super().__init__(message)
        self.h_last = h_last


class CertificateError(SaddlePassError):
    """An iterate certificate violated one of its required inequalities."""
