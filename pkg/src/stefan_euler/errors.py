"""Exception taxonomy shared across the package.

Validation failures (bad user input) and engine failures (a run that cannot
continue) are kept as distinct branches so the CLI can map them to exit
codes 2 and 3.
"""

from __future__ import annotations


class StefanError(Exception):
    """Base class for all package errors."""


class ValidationError(StefanError):
    """Bad inputs, rejected before any work starts."""


class EngineError(StefanError):
    """A run that started but cannot be completed faithfully."""


class NoValidSupport(ValidationError):
    """No support bound A with a nonnegative density satisfies the mass constraint."""


class InvalidMesh(ValidationError):
    """Nonpositive dt, or horizon shorter than one step."""


class MeshMismatch(ValidationError):
    """Curves that were expected to share (or refine) a mesh do not."""


class InvalidGrid(EngineError):
    """Spatial grid unusable: h <= 0, or mass reaches the right boundary."""


class DomainError(ValidationError):
    """Argument outside the mathematical domain of a function."""


class OutOfRange(ValidationError):
    """Inversion target outside the attainable range of the function."""


class WindowExceeded(ValidationError):
    """Requested time window is outside the range where the local bound applies."""


class NonpositiveConstant(ValidationError):
    """A constant that the rate bound requires to be positive is not."""


class BoundVacuous(StefanError):
    """The error bound cannot be evaluated at this step size (dt not small enough)."""


class DegenerateInput(ValidationError):
    """Too little or degenerate data for a fit."""
