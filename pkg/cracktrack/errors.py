#!/usr/bin/env python
# coding: utf-8

"""
Exception hierarchy for CrackTrack.

Every failure mode of the library has its own class. Each class also derives from the
closest builtin exception, so code catching ``ValueError`` or ``RuntimeError`` keeps working.
"""


class CrackTrackError(Exception):
    """Base class of every error raised by CrackTrack."""


class DomainError(CrackTrackError, ValueError):
    """A point or region lies outside the domain where an object is defined."""


class SingularityError(DomainError):
    """Evaluation requested at a singular point (the origin for mode-a1 potentials)."""


class ConstructionError(CrackTrackError, ValueError):
    """An object could not be built from the given parameters."""


class UnsupportedDimensionError(CrackTrackError, NotImplementedError):
    """The requested dimension N is not supported by this operation."""


class EigenConvergenceError(CrackTrackError, RuntimeError):
    """Subspace iteration did not converge.

    Attributes:
        residuals: relative residual per requested eigenpair at the last iteration
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class GeometryError(CrackTrackError, RuntimeError):
    """Point location on a mesh failed."""


class MeshingError(CrackTrackError, ValueError):
    """A mesh could not be generated for the requested parameters."""


class PreconditionError(CrackTrackError, ValueError):
    """A documented precondition of an operation is violated."""


class WellPosednessError(CrackTrackError, RuntimeError):
    """The discrete bilinear form is not positive definite."""


class SolverError(CrackTrackError, RuntimeError):
    """The linear solver did not reach its tolerance.

    Attributes:
        iteration_log: relative residual per iteration
    """

    def __init__(self, message, iteration_log=None):
        super().__init__(message)
        self.iteration_log = iteration_log or []


class ResolutionError(CrackTrackError, ValueError):
    """A radius is too small for the mesh to resolve it."""


class UnderflowError(CrackTrackError, ArithmeticError):
    """A quantity is numerically zero where a positive value is needed."""


class IllConditionedFitError(CrackTrackError, ArithmeticError):
    """A least squares fit is too badly conditioned to be trusted."""

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class IntegrabilityError(CrackTrackError, ArithmeticError):
    """A fitted power law is too weak for an improper integral to converge."""

    def __init__(self, message, exponent=None):
        super().__init__(message)
        self.exponent = exponent


class TrivialFieldError(CrackTrackError, ValueError):
    """The field vanishes identically at working precision."""


class RadiusTooLargeError(CrackTrackError, ValueError):
    """The coercivity side condition C r^eps < (N-1)/4 fails."""


class ConfigError(CrackTrackError, ValueError):
    """A run configuration is invalid.

    Attributes:
        field: dotted name of the offending configuration entry
        line: 1-based line in the configuration file, when known
    """

    def __init__(self, message, field=None, line=None):
        location = ""
        if field is not None:
            location = f" [{field}"
            location += f", line {line}]" if line is not None else "]"
        super().__init__(message + location)
        self.field = field
        self.line = line
