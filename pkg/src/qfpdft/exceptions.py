"""Exception hierarchy shared by the library and the command-line front end."""


class QfpError(Exception):
    """Base class for all errors raised by qfpdft."""


class ValidationError(QfpError, ValueError):
    """Invalid parameters, geometry, or input data (CLI exit code 2)."""


class GeometryError(ValidationError):
    """Inconsistent lattice / pulse-shaper placement."""


class NumericalError(QfpError, ArithmeticError):
    """A numerical computation could not be carried out (CLI exit code 3)."""


class TruncationError(NumericalError):
    """Fourier coefficient truncation discards more mass than tolerated.

    Attributes
    ----------
    residual : float
        Probability mass outside the retained coefficient window.
    """

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class DegenerateInputError(NumericalError):
    """Input carries no usable weight (all-zero matrix, zero total probability)."""
