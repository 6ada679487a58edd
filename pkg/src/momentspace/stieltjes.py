"""Stieltjes transforms: continued fractions, boundary values and inversion.

The transform of a probability measure is ``Phi(z) = int dmu(x) / (z - x)``;
it maps the upper half plane into the lower one.  Given recursion
coefficients it is the limit of the Jacobi continued fraction

    1/(z - alpha_1 - beta_1/(z - alpha_2 - beta_2/(z - alpha_3 - ...)))

which :func:`cf_convergent` truncates at a given depth.  The same value can
be obtained from the forward numerator/denominator recursions
``A_j = (z - alpha_j) A_{j-1} - beta_{j-1} A_{j-2}`` (same for ``B_j``), but
those grow like ``|z|^j`` and need renormalisation; the backward evaluation
used here does not.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import ArityError, InversionError

DEFAULT_SCHEDULE = (1e-2, 5e-3, 2.5e-3)


@dataclass(frozen=True)
class UpperHalfPlanePoint:
    re: float
    im: float

    def __post_init__(self):
        if not self.im > 0:
            raise ValueError(f"imaginary part must be positive, got {self.im}")

    def __complex__(self):
        return complex(self.re, self.im)


@dataclass(frozen=True)
class EpsilonSchedule:
    """Strictly decreasing positive offsets ``y`` used to approach the real axis."""

    values: tuple = DEFAULT_SCHEDULE

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 2:
            raise ValueError("an epsilon schedule needs at least two offsets")
        if any(v <= 0 for v in vals) or any(b >= a for a, b in zip(vals, vals[1:])):
            raise ValueError(f"schedule must be positive and strictly decreasing: {vals}")
        object.__setattr__(self, "values", vals)


def cf_convergent(rc, depth, z):
    """Depth-``depth`` convergent of the Jacobi continued fraction at ``z``.

    ``rc`` is anything with ``alpha`` and ``beta`` sequences.  It needs
    ``depth`` alphas and ``depth - 1`` betas.
    """
    z = complex(z)
    if depth < 1:
        raise ArityError("depth must be at least 1")
    if len(rc.alpha) < depth or len(rc.beta) < depth - 1:
        raise ArityError(
            f"depth {depth} needs {depth} alphas and {depth - 1} betas, "
            f"got {len(rc.alpha)} and {len(rc.beta)}")
    alpha = [float(a) for a in rc.alpha[:depth]]
    beta = [float(b) for b in rc.beta[:depth - 1]]
    t = z - alpha[-1]
    for j in range(depth - 2, -1, -1):
        t = z - alpha[j] - beta[j] / t
    return 1.0 / t


def sqrt_branch(z, alpha, beta):
    """``sqrt((z - alpha)^2 - 4 beta)`` on the branch with positive imaginary part.

    For real ``z`` the continuous boundary extension is returned::

        -sqrt((x-alpha)^2 - 4 beta)     x < alpha - 2 sqrt(beta)
        i sqrt(4 beta - (x-alpha)^2)    inside the band
        +sqrt((x-alpha)^2 - 4 beta)     x > alpha + 2 sqrt(beta)
    """
    z = complex(z)
    w = (z - alpha) ** 2 - 4.0 * beta
    if z.imag == 0.0:
        x = z.real
        d = (x - alpha) ** 2 - 4.0 * beta
        if d <= 0:
            return complex(0.0, math.sqrt(-d))
        return complex(math.copysign(math.sqrt(d), x - alpha), 0.0)
    s = cmath.sqrt(w)
    # w is never on [0, inf) in the open upper half plane, so Im s != 0 there
    if s.imag < 0:
        s = -s
    return s


def closed_form_transform(measure, z):
    """Closed-form Stieltjes transform of a limit measure (boundary values on R)."""
    return measure.stieltjes(z)


def _extrapolate_to_zero(ys, fs):
    """Neville extrapolation of the polynomial through (ys, fs) to y = 0."""
    p = list(fs)
    n = len(ys)
    for level in range(1, n):
        for i in range(n - level):
            y0, y1 = ys[i], ys[i + level]
            p[i] = (y1 * p[i] - y0 * p[i + 1]) / (y1 - y0)
    return p[0]


def invert_density(transform, x, eps=None, tol=1e-3):
    """Density ``-(1/pi) lim_{y->0+} Im Phi(x + iy)`` by Richardson extrapolation.

    ``transform`` is any callable ``z -> Phi(z)``.  The estimate using the full
    schedule is compared with the one omitting the largest offset; if they
    differ by more than ``tol`` an :class:`InversionError` is raised.
    """
    schedule = eps if isinstance(eps, EpsilonSchedule) else EpsilonSchedule(eps or DEFAULT_SCHEDULE)
    ys = schedule.values
    fs = [-transform(complex(x, y)).imag / math.pi for y in ys]
    full = _extrapolate_to_zero(ys, fs)
    tail = _extrapolate_to_zero(ys[1:], fs[1:])
    if not (math.isfinite(full) and abs(full - tail) <= tol):
        raise InversionError(
            f"inversion at x={x} did not settle: estimates {tail!r} vs {full!r}")
    return max(full, 0.0)


def atom_mass(transform, x, eps=(1e-6, 5e-7, 2.5e-7), snap=1e-9):
    """Point mass ``-lim_{y->0+} y Im Phi(x + iy)``.

    Values below ``snap`` are reported as exactly zero.
    """
    ys = EpsilonSchedule(eps).values
    fs = [-y * transform(complex(x, y)).imag for y in ys]
    w = _extrapolate_to_zero(ys, fs)
    return 0.0 if w < snap else float(w)


def hilbert_transform(measure, t):
    """Principal-value ``int dmu(s)/(t - s)`` as ``Re Phi(t + i0)``."""
    return measure.stieltjes(complex(float(t), 0.0)).real


def moments_from_transform(transform, k, radius=10.0, nodes=64):
    """Read ``m_1..m_k`` off the Laurent expansion ``Phi(z) = sum_j m_j / z^{j+1}``.

    Uses trapezoidal Cauchy integrals on the circle ``|z| = radius`` restricted
    to the upper half plane by conjugate symmetry, so only ``Im z > 0`` is
    evaluated.  The radius must exceed the support radius; very large radii
    lose digits to cancellation in ``z^(j+1) Phi(z)``.
    """
    theta = (np.arange(nodes) + 0.5) * np.pi / nodes
    zs = radius * np.exp(1j * theta)
    vals = np.array([transform(complex(z)) for z in zs])
    out = []
    for j in range(1, k + 1):
        # m_j = (1/2 pi i) oint z^j Phi(z) dz; lower half is the conjugate
        integrand = zs ** (j + 1) * vals
        out.append(float(np.real(integrand).mean()))
    return np.array(out)
