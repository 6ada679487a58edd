"""Limit measures of random moment sequences.

* :class:`FreeBinomial` -- the free binomial (Kesten-McKay) law on ``[a, b]``
  with constant odd/even canonical moments ``p1``, ``p2``; it may carry atoms
  at ``a`` and ``b``.
* :class:`MarchenkoPastur` -- constant half-line coordinates ``z1``, ``z2``;
  possible atom at 0.
* :class:`Semicircle` -- constant recursion coefficients ``alpha``, ``beta``.

Each family exposes its density, atoms, support, Stieltjes transform,
recursion coefficients and moments.  The module also checks the
Euler-Lagrange characterisation of the atom-free members as equilibrium
measures and the scaling limits that turn free binomial laws into
Marchenko-Pastur and semicircle laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from . import coords
from .coords import HALF_LINE, REAL_LINE, Compact, HalfLine, MomentVector, RealLine
from .errors import UnsupportedFieldError
from .stieltjes import hilbert_transform, sqrt_branch


@lru_cache(maxsize=None)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


def _catalan(i):
    return comb(2 * i, i) // (i + 1)


def _pos(x):
    return x if x > 0 else 0.0


class _LimitMeasure:
    """Shared machinery; subclasses define support, tail and denominators."""

    def support(self):
        """``(l_minus, l_plus)`` of the absolutely continuous part."""
        a, b = self.tail
        r = 2.0 * math.sqrt(b)
        return a - r, a + r

    def density(self, x):
        """Density of the absolutely continuous part (0 off the support)."""
        x = np.asarray(x, dtype=float)
        lm, lp = self.support()
        inside = (x > lm) & (x < lp)
        xi = np.where(inside, x, 0.5 * (lm + lp))
        val = np.sqrt((xi - lm) * (lp - xi)) / self._denominator(xi)
        out = np.where(inside, val, 0.0)
        return float(out) if out.ndim == 0 else out

    def stieltjes(self, z):
        raise NotImplementedError

    def recursion_coefficients(self, count):
        """``count`` alphas and betas of the (constant-tail) recurrence."""
        raise NotImplementedError

    def moments(self, k):
        raise NotImplementedError

    def theta_nodes(self, nodes=256):
        """Quadrature for the absolutely continuous part.

        Substitutes ``x = l_- + L sin^2(theta)``; the square-root edge factors
        then become ``L sin(theta) cos(theta)`` and the integrand is smooth.
        Returns ``(x, w)`` with ``sum(w * f(x)) ~ int f dmu_ac``.
        """
        lm, lp = self.support()
        L = lp - lm
        t, wt = _leggauss(nodes)
        theta = 0.25 * np.pi * (t + 1.0)
        wt = 0.25 * np.pi * wt
        return self._theta_xw(theta, wt, lm, L)

    def _theta_xw(self, theta, wt, lm, L):
        sc = np.sin(theta) * np.cos(theta)
        x = lm + L * np.sin(theta) ** 2
        g = (L * sc) * (2.0 * L * sc) / self._denominator(x, theta=theta)
        return x, wt * g

    def total_mass(self, nodes=256):
        x, w = self.theta_nodes(nodes)
        return float(w.sum()) + sum(wa for _, wa in self.atoms())

    def quadrature_moments(self, k, nodes=256):
        """Moments from density quadrature plus atoms (a verification path)."""
        x, w = self.theta_nodes(nodes)
        out = []
        for j in range(1, k + 1):
            out.append(float(np.sum(w * x ** j)) + sum(wa * xa ** j for xa, wa in self.atoms()))
        return np.array(out)


@dataclass(frozen=True)
class FreeBinomial(_LimitMeasure):
    """Free binomial law on ``[a, b]`` with canonical moments ``p1`` (odd) and ``p2`` (even)."""

    p1: float
    p2: float
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not (0 < self.p1 < 1 and 0 < self.p2 < 1):
            raise ValueError(f"p1, p2 must lie in (0, 1), got {self.p1}, {self.p2}")
        if not self.a < self.b:
            raise ValueError("need a < b")

    @property
    def interval(self):
        return Compact(self.a, self.b)

    space = interval

    @property
    def coordinates(self):
        return self.p1, self.p2

    @property
    def tail(self):
        """``(alpha, beta)`` shared by all recursion coefficients from index 2 on."""
        p1, p2 = self.p1, self.p2
        q1, q2 = 1 - p1, 1 - p2
        w = self.b - self.a
        return self.a + w * (p1 * q2 + p2 * q1), w * w * p1 * q1 * p2 * q2

    def support(self):
        p1, p2 = self.p1, self.p2
        q1, q2 = 1 - p1, 1 - p2
        u, v = math.sqrt(p1 * q2), math.sqrt(p2 * q1)
        w = self.b - self.a
        return self.a + w * (u - v) ** 2, self.a + w * (u + v) ** 2

    def _denominator(self, x, theta=None):
        return 2.0 * np.pi * self.p2 * (x - self.a) * (self.b - x)

    def atoms(self):
        out = []
        wa = _pos(1 - self.p1 / self.p2)
        wb = _pos((self.p1 + self.p2 - 1) / self.p2)
        if wa > 0:
            out.append((self.a, wa))
        if wb > 0:
            out.append((self.b, wb))
        return out

    def stieltjes(self, z):
        z = complex(z)
        alpha, beta = self.tail
        p1, p2 = self.p1, self.p2
        s = sqrt_branch(z, alpha, beta)
        num = (1 - 2 * p2) * z + alpha - 2 * (1 - p2) * (self.a + (self.b - self.a) * p1) - s
        return num / (2 * p2 * (z - self.a) * (self.b - z))

    def recursion_coefficients(self, count):
        y = coords.constant_coordinates(self.p1, self.p2, 2 * count)
        return coords.canonical_to_recursion(self.interval, y, max_order=2 * count)

    def moments(self, k, max_order=None):
        y = coords.constant_coordinates(self.p1, self.p2, k)
        return coords.canonical_to_moments(self.interval, y, max_order=max_order)

    def equilibrium_field(self):
        if self.atoms():
            raise UnsupportedFieldError(
                "the free binomial law has atoms; no equilibrium field is defined")
        c_left = -(self.p1 / self.p2 - 1)
        c_right = -(1 - self.p1 - self.p2) / self.p2
        return EquilibriumField(poly=(), log_left=c_left, log_right=c_right,
                                left=self.a, right=self.b)


@dataclass(frozen=True)
class MarchenkoPastur(_LimitMeasure):
    """Marchenko-Pastur law with half-line coordinates ``z1`` (odd) and ``z2`` (even)."""

    z1: float
    z2: float

    def __post_init__(self):
        if not (self.z1 > 0 and self.z2 > 0):
            raise ValueError("z1, z2 must be positive")

    space = HALF_LINE

    @property
    def coordinates(self):
        return self.z1, self.z2

    @property
    def tail(self):
        return self.z1 + self.z2, self.z1 * self.z2

    def support(self):
        u, v = math.sqrt(self.z1), math.sqrt(self.z2)
        return (u - v) ** 2, (u + v) ** 2

    def _denominator(self, x, theta=None):
        return 2.0 * np.pi * self.z2 * x

    def atoms(self):
        w = _pos(1 - self.z1 / self.z2)
        return [(0.0, w)] if w > 0 else []

    def stieltjes(self, z):
        z = complex(z)
        alpha, beta = self.tail
        s = sqrt_branch(z, alpha, beta)
        return (z - self.z1 + self.z2 - s) / (2 * self.z2 * z)

    def recursion_coefficients(self, count):
        y = coords.constant_coordinates(self.z1, self.z2, 2 * count)
        return coords.canonical_to_recursion(HALF_LINE, y, max_order=2 * count)

    def moments(self, k, max_order=None):
        y = coords.constant_coordinates(self.z1, self.z2, k)
        return coords.canonical_to_moments(HALF_LINE, y, max_order=max_order)

    def equilibrium_field(self):
        if self.atoms():
            raise UnsupportedFieldError(
                "Marchenko-Pastur law with z1 < z2 has an atom at 0; no field is defined")
        return EquilibriumField(poly=(0.0, 1.0 / self.z2),
                                log_left=-(self.z1 - self.z2) / self.z2, left=0.0)


@dataclass(frozen=True)
class Semicircle(_LimitMeasure):
    """Semicircle law with constant recursion coefficients ``alpha``, ``beta``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    space = REAL_LINE

    @property
    def coordinates(self):
        return self.alpha, self.beta

    @property
    def tail(self):
        return self.alpha, self.beta

    def _denominator(self, x, theta=None):
        return 2.0 * np.pi * self.beta * np.ones_like(x)

    def atoms(self):
        return []

    def stieltjes(self, z):
        z = complex(z)
        s = sqrt_branch(z, self.alpha, self.beta)
        return (z - self.alpha - s) / (2 * self.beta)

    def recursion_coefficients(self, count):
        return coords.RecursionCoefficients((self.alpha,) * count, (self.beta,) * count)

    def moments(self, k, max_order=None):
        """``m_j = sum_i C(j, 2i) beta^i alpha^(j-2i) Catalan_i``."""
        a, b = Fraction(self.alpha), Fraction(self.beta)
        vals = []
        for j in range(1, k + 1):
            vals.append(sum(comb(j, 2 * i) * b ** i * a ** (j - 2 * i) * _catalan(i)
                            for i in range(j // 2 + 1)))
        return MomentVector(REAL_LINE, vals)

    def equilibrium_field(self):
        return EquilibriumField(poly=(0.0, -self.alpha / self.beta, 0.5 / self.beta))


LimitMeasure = (FreeBinomial, MarchenkoPastur, Semicircle)


def density(measure, x):
    return measure.density(x)


def atoms(measure):
    return measure.atoms()


def support(measure):
    return measure.support()


def moments(measure, k):
    return measure.moments(k)


def equilibrium_field(measure):
    return measure.equilibrium_field()


def mp_moments_closed_form(z1, z2, k, variant="corrected"):
    """Closed-form Marchenko-Pastur moments in two variants.

    ``"as_printed"``::

        m_j = sum_{i=0}^{floor((j-1)/2)} C(j-1, i) z1^(i+1) z2^i (z1+z2)^(j-1-i) Catalan_i

    ``"corrected"`` uses ``C(j-1, 2i)`` and exponent ``j-1-2i``; only this one
    is homogeneous of degree ``j`` and agrees with the recursion pipeline.
    """
    key = variant.lower().replace("-", "_")
    if key not in ("as_printed", "corrected"):
        raise ValueError(f"unknown variant {variant!r}")
    a, b = Fraction(z1), Fraction(z2)
    out = []
    for j in range(1, k + 1):
        total = Fraction(0)
        for i in range((j - 1) // 2 + 1):
            if key == "as_printed":
                total += comb(j - 1, i) * a ** (i + 1) * b ** i * (a + b) ** (j - 1 - i) * _catalan(i)
            else:
                total += comb(j - 1, 2 * i) * a ** (i + 1) * b ** i * (a + b) ** (j - 1 - 2 * i) * _catalan(i)
        out.append(total)
    return MomentVector(HALF_LINE, out)


def limit_measure_from_minimizers(space, y1, y2):
    """Limit measure for constant odd/even coordinates ``y1``, ``y2`` on ``space``."""
    if isinstance(space, Compact):
        return FreeBinomial(y1, y2, space.a, space.b)
    if isinstance(space, HalfLine):
        return MarchenkoPastur(y1, y2)
    if isinstance(space, RealLine):
        return Semicircle(y1, y2)
    raise TypeError(f"not a moment space: {space!r}")


# ---------------------------------------------------------------------------
# equilibrium problems


@dataclass(frozen=True)
class EquilibriumField:
    """``Q(t) = sum c_i t^i + log_left log(t - left) + log_right log(right - t)``."""

    poly: tuple = ()
    log_left: float = 0.0
    log_right: float = 0.0
    left: float = 0.0
    right: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.polynomial.polynomial.polyval(t, self.poly) if self.poly else np.zeros_like(t)
        if self.log_left:
            out = out + self.log_left * np.log(t - self.left)
        if self.log_right:
            out = out + self.log_right * np.log(self.right - t)
        return out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        dpoly = np.polynomial.polynomial.polyder(self.poly) if len(self.poly) > 1 else ()
        out = np.polynomial.polynomial.polyval(t, dpoly) if len(dpoly) else np.zeros_like(t)
        if self.log_left:
            out = out + self.log_left / (t - self.left)
        if self.log_right:
            out = out - self.log_right / (self.right - t)
        return out


def log_potential(measure, t, nodes=512):
    """``int log|t - s| dmu(s)`` for an atom-free limit measure.

    Uses the substitution ``s = l_- + L sin^2(theta)``.  For ``t`` inside the
    support, ``log|s - t| = log L + log|sin(theta - theta_t)| + log|sin(theta + theta_t)|``;
    the logarithmic singularity at ``theta_t`` is subtracted and integrated in
    closed form, and the remainder is integrated on the two panels either side
    of ``theta_t`` with Gauss-Legendre rules of ``nodes // 2`` points each.
    """
    lm, lp = measure.support()
    L = lp - lm
    t = float(t)
    if not lm < t < lp:
        x, w = measure.theta_nodes(nodes)
        return float(np.sum(w * np.log(np.abs(x - t))))

    theta_t = math.asin(math.sqrt((t - lm) / L))
    half = math.pi / 2
    g_t = _theta_density(measure, np.array([theta_t]), lm, L)[0]
    gl_t, gl_w = _leggauss(max(nodes // 2, 8))
    total = 0.0
    for lo, hi in ((0.0, theta_t), (theta_t, half)):
        th = lo + (hi - lo) * (gl_t + 1.0) / 2
        wt = gl_w * (hi - lo) / 2
        g = _theta_density(measure, th, lm, L)
        d = th - theta_t
        smooth = g * (np.log(np.abs(np.sin(th + theta_t))) + np.log(np.sin(np.abs(d)) / np.abs(d)))
        total += float(np.sum(wt * (smooth + (g - g_t) * np.log(np.abs(d)))))
    A, B = theta_t, half - theta_t
    total += g_t * (A * math.log(A) - A + B * math.log(B) - B)
    mass = _theta_density_mass(measure, lm, L, nodes)
    return total + mass * math.log(L)


def _theta_density(measure, theta, lm, L):
    x, w = measure._theta_xw(theta, np.ones_like(theta), lm, L)
    return w


def _theta_density_mass(measure, lm, L, nodes):
    x, w = measure.theta_nodes(nodes)
    return float(w.sum())


@dataclass
class EquilibriumReport:
    support_grid: np.ndarray
    support_grid_values: np.ndarray
    constancy_spread: float
    exterior_violation: float
    constant_level: float
    derivative_mismatch: float
    exterior_grid: np.ndarray = field(default_factory=lambda: np.empty(0))
    exterior_values: np.ndarray = field(default_factory=lambda: np.empty(0))

    def passed(self, spread_tol=1e-4, exterior_tol=1e-6):
        return self.constancy_spread < spread_tol and self.exterior_violation <= exterior_tol


def _exterior_grid(measure, count):
    lm, lp = measure.support()
    L = lp - lm
    u = (np.arange(count) + 0.5) / count
    if isinstance(measure, FreeBinomial):
        pieces = []
        if lm - measure.a > 1e-12 * L:
            pieces.append(measure.a + (lm - measure.a) * u)
        if measure.b - lp > 1e-12 * L:
            pieces.append(lp + (measure.b - lp) * u)
        return np.concatenate(pieces) if pieces else np.empty(0)
    if isinstance(measure, MarchenkoPastur):
        pieces = [lp + 2 * L * u]
        if lm > 1e-12 * L:
            pieces.insert(0, lm * u)
        return np.concatenate(pieces)
    return np.concatenate([lm - L * u[::-1], lp + L * u])


def verify_equilibrium(measure, grid_size=64, nodes=512):
    """Check the Euler-Lagrange conditions of an atom-free limit measure.

    The effective potential ``Q(t) - 2 int log|t - s| dmu(s)`` must be constant
    (``constant_level``) on the support and no smaller off it.  Also reports
    the worst mismatch of ``Q'(t) = 2 H(t)`` with the Hilbert transform.
    """
    field_ = measure.equilibrium_field()
    lm, lp = measure.support()
    L = lp - lm
    theta = (np.arange(grid_size) + 0.5) * (np.pi / 2) / grid_size
    grid = lm + L * np.sin(theta) ** 2

    def effective(t):
        return float(field_(t)) - 2.0 * log_potential(measure, t, nodes)

    values = np.array([effective(t) for t in grid])
    level = float(values.mean())
    spread = float(values.max() - values.min())

    ext = _exterior_grid(measure, max(grid_size // 2, 4))
    ext_vals = np.array([effective(t) for t in ext])
    violation = float(np.max(level - ext_vals, initial=0.0))
    violation = max(violation, 0.0)

    inner = grid[(grid > lm + 0.05 * L) & (grid < lp - 0.05 * L)]
    mismatch = max((abs(float(field_.derivative(t)) - 2.0 * hilbert_transform(measure, t))
                    for t in inner), default=0.0)
    return EquilibriumReport(grid, values, spread, violation, level, mismatch, ext, ext_vals)


# ---------------------------------------------------------------------------
# free Poisson / free central limits


def scaling_sequence(mode, target, m):
    """Free binomial law on ``[a_m, b_m]`` approximating ``target``.

    ``"to_mp"``: ``a_m = 0``, ``b_m = m``, ``p_i = z_i / m``.
    ``"to_sc"``: ``a_m = -m``, ``b_m = m``, ``p_1 = (alpha + m) / (2m)``,
    ``p_2 = beta / m^2``.
    """
    key = mode.lower().replace("-", "_")
    if key in ("to_mp", "tomp", "mp"):
        return FreeBinomial(target.z1 / m, target.z2 / m, 0.0, float(m))
    if key in ("to_sc", "tosc", "sc"):
        return FreeBinomial((target.alpha + m) / (2.0 * m), target.beta / m ** 2, -float(m), float(m))
    raise ValueError(f"unknown mode {mode!r}")


def _shrinks(errs):
    # an error that is already exactly zero cannot shrink further
    return len(errs) < 2 or errs[-1] < errs[0] or errs[-1] == 0.0


@dataclass
class ScalingRow:
    m: float
    sup_density_error: float
    moment_errors: np.ndarray


@dataclass
class ScalingReport:
    mode: str
    target: object
    rows: list

    @property
    def density_decreasing(self):
        errs = [r.sup_density_error for r in self.rows]
        return _shrinks(errs)

    @property
    def moments_decreasing(self):
        errs = [float(np.max(r.moment_errors)) for r in self.rows]
        return _shrinks(errs)


def scaling_limit_check(mode, target, m_values, k=6, delta=0.05, grid=401):
    """Compare free binomial laws along a scaling sequence with their limit.

    For each ``m`` reports the sup-norm density error on
    ``[l_- + delta L, l_+ - delta L]`` of the target and absolute moment
    errors for orders ``1..k``.
    """
    m_values = list(m_values)
    if any(b <= a for a, b in zip(m_values, m_values[1:])):
        raise ValueError("m_values must be increasing")
    lm, lp = target.support()
    L = lp - lm
    xs = np.linspace(lm + delta * L, lp - delta * L, grid)
    target_density = target.density(xs)
    target_moments = target.moments(k).to_numpy()
    rows = []
    for m in m_values:
        fb = scaling_sequence(mode, target, m)
        err = float(np.max(np.abs(fb.density(xs) - target_density)))
        fb_moments = np.array([float(v) for v in fb.moments(k).values])
        rows.append(ScalingRow(float(m), err, np.abs(fb_moments - target_moments)))
    return ScalingReport(mode, target, rows)
