"""Exception hierarchy shared by all modules."""


class MomentSpaceError(ValueError):
    """Base class for invalid input on a moment space."""


class DomainError(MomentSpaceError):
    """A coordinate lies outside its admissible domain.

    ``index`` is the 1-based position of the offending coordinate.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class BoundaryError(DomainError):
    """The moment vector sits on the boundary of the moment space."""


class NotAMeasureError(DomainError):
    """The input does not correspond to a probability measure on E."""


class ArityError(MomentSpaceError):
    """Too few coefficients were supplied for the requested output."""


class InversionError(ArithmeticError):
    """Stieltjes inversion did not converge over the epsilon schedule."""


class NonNormalizablePotentialError(MomentSpaceError):
    """The potential violates the growth condition of its space."""


class NonUniqueMinimizerError(MomentSpaceError):
    """The W-function has more than one global minimizer."""


class UnsupportedFieldError(MomentSpaceError):
    """No equilibrium field is defined for a measure with atoms."""


class NumericError(ArithmeticError):
    """Internal numerical failure (overflow, failed tabulation)."""
