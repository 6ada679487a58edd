"""Random moment sequences on compact intervals, the half line and the real line.

Submodules
----------
coords       canonical coordinates, recursion coefficients and moments
stieltjes    continued fractions and Stieltjes inversion
measures     free binomial, Marchenko-Pastur and semicircle limit laws
sampling     random moment vectors from independent canonical coordinates
asymptotics  minimizers, CLT covariance, deviation rates and experiments
cli          command-line interface
"""

__version__ = "0.1.0"

from . import asymptotics, coords, measures, sampling, stieltjes  # noqa: E402
from .coords import (HALF_LINE, REAL_LINE, CanonicalCoordinates, Compact,  # noqa: E402
                     HalfLine, Interval, MomentVector, RealLine, RecursionCoefficients)

__all__ = [
    "asymptotics", "coords", "measures", "sampling", "stieltjes",
    "Compact", "Interval", "HalfLine", "RealLine", "HALF_LINE", "REAL_LINE",
    "MomentVector", "CanonicalCoordinates", "RecursionCoefficients",
]
