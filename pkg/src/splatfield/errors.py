"""Exception types raised across the package."""


class SplatfieldError(Exception):
    """Base class for all package errors."""


class DimensionError(SplatfieldError, ValueError):
    """Operation requested in an unsupported spatial dimension."""


class SizeError(SplatfieldError, ValueError):
    """Too few (or too many) items for the requested operation."""


class ParameterError(SplatfieldError, ValueError):
    """A parameter is outside its admissible range."""


class UndefinedRatioError(SplatfieldError, ArithmeticError):
    """A normalising quantity is zero, so a ratio is undefined."""


class NumericalDegeneracyError(SplatfieldError, ArithmeticError):
    """Base for failures caused by numerically degenerate inputs."""


class DegeneracyError(NumericalDegeneracyError):
    """Geometric degeneracy such as duplicate centers."""


class DegenerateSupportError(NumericalDegeneracyError):
    """The primitive mass underflowed at a query point."""

    def __init__(self, point, mass):
        self.point = tuple(float(v) for v in point)
        self.mass = float(mass)
        super().__init__(
            f"basis mass {self.mass:.3e} underflowed at query point {self.point}"
        )


class ConditioningError(NumericalDegeneracyError):
    """A linear system is singular or indefinite at working precision."""

    def __init__(self, message, pivot=None):
        self.pivot = pivot
        if pivot is not None:
            message = f"{message} (smallest pivot {pivot:.3e})"
        super().__init__(message)
