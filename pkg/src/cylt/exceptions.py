"""Exception and warning types raised across the package."""


class CyltError(Exception):
    """Base class for all package errors."""


class DomainError(CyltError, ValueError):
    """Argument outside the region where a series or formula is valid."""


class ConvergenceError(CyltError, RuntimeError):
    """A series or quadrature did not reach the requested tolerance."""


class ConstraintError(CyltError, ValueError):
    """Parameters violate the model's constraints."""


class SamplingError(CyltError, RuntimeError):
    """Rejection budget exhausted."""


class DomainWarning(UserWarning):
    """Evaluation is valid but close to a region of poor convergence."""


class BoundaryWarning(UserWarning):
    """Parameters sit exactly on a classification boundary."""


class PreconditionError(CyltError, ValueError):
    """An operation was called outside the parameter range it supports."""
