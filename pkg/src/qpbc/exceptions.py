#!/usr/bin/env python3
"""Exception hierarchy shared by the library and the CLI exit-code mapping."""

from __future__ import annotations


class QpbcError(Exception):
    """Base class for all qpbc errors."""


class InvalidInstanceError(QpbcError, ValueError):
    """Malformed instance data: dimensions, symmetry, non-finite entries."""


class EmptyPolytopeError(InvalidInstanceError):
    pass


class UnboundedPolytopeError(InvalidInstanceError):
    pass


class LowerDimensionalError(QpbcError, ValueError):
    """The polytope has no interior (Chebyshev radius at or below tolerance)."""


class RankDeficientError(QpbcError, ValueError):
    pass


class GuardExceededError(QpbcError, ValueError):
    pass


class NumericalFailure(QpbcError, RuntimeError):
    """A conic solve ended without a usable optimal solution."""
