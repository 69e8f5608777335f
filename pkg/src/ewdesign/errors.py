"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class EWDesignError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(EWDesignError, ValueError):
    pass


class SingularMatrix(EWDesignError, ArithmeticError):
    """Raised when a matrix is numerically singular and must not be inverted."""


class InfeasibleParameters(EWDesignError, ValueError):
    """A parameter vector produces non-positive category probabilities."""


class AllDrawsInfeasible(EWDesignError, RuntimeError):
    pass


class DegenerateProfile(EWDesignError, ArithmeticError):
    """Every evaluation of a lift-one profile is zero."""


class SingularStart(EWDesignError, RuntimeError):
    pass


class MaxIterExceeded(EWDesignError, RuntimeError):
    """Outer iteration budget exhausted; ``design`` carries the best design so far."""

    def __init__(self, message: str, design=None, audit=None):
        super().__init__(message)
        self.design = design
        self.audit = audit


class AllPointsDropped(EWDesignError, RuntimeError):
    pass


class ReferenceSingular(EWDesignError, ArithmeticError):
    pass


class ConfigError(EWDesignError, ValueError):
    """Invalid experiment configuration; message carries the file location."""
