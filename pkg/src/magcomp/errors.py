"""Exception types shared across the package."""


class MagcompError(Exception):
    """Base class for all errors raised by magcomp."""


class DataError(MagcompError, ValueError):
    """Input data failed validation (missing columns, NaN, bad shapes, ...)."""


class NumericalError(MagcompError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy result."""


class SingularFitError(NumericalError):
    """The calibration normal matrix is singular for the requested fit.

    Attributes
    ----------
    condition : float
        Condition estimate of the filtered design matrix (may be ``inf``).
    """

    def __init__(self, message, condition):
        super().__init__(message)
        self.condition = condition
