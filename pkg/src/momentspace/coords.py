"""Coordinate systems on the moment spaces of [a, b], [0, inf) and R.

Three equivalent descriptions of a point in the interior of a moment space
are supported:

* ordinary moments ``m_1, ..., m_n`` (:class:`MomentVector`),
* canonical coordinates: ``p_j`` in (0, 1) on a compact interval, ``z_j > 0``
  on the half line, and the interleaved recursion coefficients
  ``(alpha_1, beta_1, alpha_2, ...)`` on the real line
  (:class:`CanonicalCoordinates`),
* recursion coefficients of the monic orthogonal polynomials
  (:class:`RecursionCoefficients`).

The scalar transforms run in exact rational arithmetic (``fractions.Fraction``).
Moment spaces of compact intervals are exponentially thin, so a float64
moment vector of order 12 already carries too little information to recover
its last canonical coordinates; exact values avoid that loss entirely.
``to_numpy()`` gives the float view.  Vectorised float paths for sampling
live in :func:`canonical_to_moments_batch`, and exact derivatives for the
Jacobian are propagated with dual numbers through the same recursions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from ._dual import Dual
from .errors import ArityError, BoundaryError, DomainError, NotAMeasureError

#: Default cap on the order of exact transforms; Hankel-type conditioning
#: (and the size of the rationals) grows quickly beyond it.
MAX_ORDER = 30

#: Canonical coordinates closer than this to the edge of their domain are
#: classified as boundary points.
INTERIOR_MARGIN = 1e-10


# ---------------------------------------------------------------------------
# spaces


@dataclass(frozen=True)
class Compact:
    """The compact interval ``[a, b]``."""

    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got a={self.a}, b={self.b}")

    @property
    def length(self):
        return self.b - self.a

    def __str__(self):
        return f"[{self.a:g}, {self.b:g}]"


#: The interval type carried by compact spaces.
Interval = Compact


@dataclass(frozen=True)
class HalfLine:
    """The half line ``[0, inf)``."""

    def __str__(self):
        return "[0, inf)"


@dataclass(frozen=True)
class RealLine:
    """The real line."""

    def __str__(self):
        return "R"


Space = Union[Compact, HalfLine, RealLine]

HALF_LINE = HalfLine()
REAL_LINE = RealLine()


def parse_space(name, a=0.0, b=1.0):
    """Build a space from its CLI/config name."""
    key = str(name).lower().replace("-", "").replace("_", "")
    if key in ("compact", "interval"):
        return Compact(float(a), float(b))
    if key in ("halfline", "r+", "rplus"):
        return HALF_LINE
    if key in ("realline", "real", "r"):
        return REAL_LINE
    raise ValueError(f"unknown space {name!r}")


def _check_space(space):
    if not isinstance(space, (Compact, HalfLine, RealLine)):
        raise TypeError(f"not a moment space: {space!r}")


# ---------------------------------------------------------------------------
# value types


def _exact(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x}")
    return Fraction(x)


def _exact_tuple(values):
    return tuple(_exact(v) for v in values)


class _ExactVector:
    """Mixin giving exact-valued vectors a float view."""

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def to_numpy(self):
        return np.array([float(v) for v in self.values], dtype=float)

    def __array__(self, dtype=None, copy=None):
        arr = self.to_numpy()
        return arr if dtype is None else arr.astype(dtype)


@dataclass(frozen=True)
class MomentVector(_ExactVector):
    """Ordinary moments ``m_1..m_n`` of a measure on ``space`` (``m_0 = 1``).

    Membership in the interior of the moment space is not checked here; use
    :func:`in_moment_space`.
    """

    space: Space
    values: tuple = field(default=())

    def __post_init__(self):
        _check_space(self.space)
        object.__setattr__(self, "values", _exact_tuple(self.values))


@dataclass(frozen=True)
class CanonicalCoordinates(_ExactVector):
    """Independent coordinates of a moment space.

    ``p_j`` (compact), ``z_j`` (half line) or interleaved
    ``alpha_1, beta_1, alpha_2, ...`` (real line).
    """

    space: Space
    values: tuple = field(default=())

    def __post_init__(self):
        _check_space(self.space)
        vals = _exact_tuple(self.values)
        object.__setattr__(self, "values", vals)
        for j, y in enumerate(vals, start=1):
            if not _coordinate_ok(self.space, j, y):
                raise DomainError(
                    f"coordinate {j} = {float(y)!r} outside its domain on {self.space}",
                    index=j)


@dataclass(frozen=True)
class RecursionCoefficients:
    """Three-term recurrence data ``P_{j+1} = (x - alpha_{j+1}) P_j - beta_j P_{j-1}``."""

    alpha: tuple = ()
    beta: tuple = ()

    def __post_init__(self):
        alpha = _exact_tuple(self.alpha)
        beta = _exact_tuple(self.beta)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        for j, b in enumerate(beta, start=1):
            if b <= 0:
                raise DomainError(f"beta_{j} = {float(b)!r} must be positive", index=2 * j)

    def interleaved(self):
        """``(alpha_1, beta_1, alpha_2, ...)`` as far as both lists reach."""
        out = []
        for j, a in enumerate(self.alpha):
            out.append(a)
            if j < len(self.beta):
                out.append(self.beta[j])
        return tuple(out)

    @classmethod
    def from_interleaved(cls, values):
        values = list(values)
        return cls(tuple(values[0::2]), tuple(values[1::2]))

    def __len__(self):
        return len(self.alpha) + len(self.beta)


class Membership(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


# ---------------------------------------------------------------------------
# generic recursions (Fraction, float, ndarray or Dual scalars)


def _coordinate_ok(space, j, y):
    if isinstance(space, Compact):
        return 0 < y < 1
    if isinstance(space, HalfLine):
        return y > 0
    return j % 2 == 1 or y > 0


def _zeta_to_recursion(zeta):
    """alpha_j = zeta_{2j-2} + zeta_{2j-1}, beta_j = zeta_{2j-1} zeta_{2j} (zeta_0 = 0)."""
    n = len(zeta)
    alpha, beta = [], []
    for j in range(1, (n + 1) // 2 + 1):
        odd = zeta[2 * j - 2]
        alpha.append(odd + zeta[2 * j - 3] if j > 1 else odd)
        if 2 * j <= n:
            beta.append(odd * zeta[2 * j - 1])
    return alpha, beta


def _compact_zeta(p):
    """zeta_j = q_{j-1} p_j with q_0 = 1."""
    return [p[0]] + [(1 - p[j - 1]) * p[j] for j in range(1, len(p))]


def _coords_to_recursion(space, y, a=None, b=None):
    if isinstance(space, RealLine):
        return list(y[0::2]), list(y[1::2])
    if isinstance(space, HalfLine):
        return _zeta_to_recursion(list(y))
    alpha, beta = _zeta_to_recursion(_compact_zeta(list(y)))
    width = b - a
    return [a + width * al for al in alpha], [width * width * be for be in beta]


def _recursion_moments(alpha, beta, k):
    """m_1..m_k from recursion coefficients.

    Expands ``x^t`` in the orthogonal basis: with ``x^t = sum_i c_i P_i`` the
    linear functional gives ``m_t = c_0``.  This is ``e_1^T J^t e_1`` for the
    monic (unsymmetrised) Jacobi matrix, diagonally similar to the symmetric
    one, and needs no square roots so it runs over any scalar type.
    """
    c = [1]
    moments = []
    for t in range(k):
        width = min(t + 1, k - t - 1) + 1
        new = []
        for j in range(width):
            term = 0
            if 0 < j <= len(c):
                term = c[j - 1]
            if j < len(c):
                term = term + alpha[j] * c[j]
            if j + 1 < len(c):
                term = term + beta[j] * c[j + 1]
            new.append(term)
        c = new
        moments.append(c[0])
    return moments


def _g_moments(z, k):
    """Half-line moments through the double sequence g_{i,j}; m_k = g_{k,k}."""
    # g[i][j] for 0 <= i <= j <= k
    g = [[1] * (k + 1)]
    for i in range(1, k + 1):
        row = [0] * (k + 1)
        for j in range(i, k + 1):
            left = row[j - 1] if j - 1 >= i else 0
            row[j] = left + z[j - i] * g[i - 1][j]
        g.append(row)
    return [g[i][i] for i in range(1, k + 1)]


def _chebyshev(m):
    """Yield alpha_1, beta_1, alpha_2, ... from moments (m_0 = 1 prepended).

    Modified Chebyshev algorithm with ordinary moments, i.e. Gram-Schmidt on
    the moment functional through ``sigma_{k,l} = L(P_k x^l)``.  Lazy, so a
    consumer can stop at the first non-positive beta before any division by it.
    """
    n = len(m)
    mom = [1] + list(m)
    sig_prev = None
    sig = mom[:]
    ratio_prev = 0
    beta_prev = None
    k = 0
    while True:
        if 2 * k + 1 > n:
            return
        alpha = sig[k + 1] / sig[k] - ratio_prev
        yield alpha
        if 2 * k + 2 > n:
            return
        new = [None] * (n + 1)
        for l in range(k + 1, n - k):
            v = sig[l + 1] - alpha * sig[l]
            if sig_prev is not None:
                v = v - beta_prev * sig_prev[l]
            new[l] = v
        beta = new[k + 1] / sig[k]
        yield beta
        ratio_prev = sig[k + 1] / sig[k]
        sig_prev, sig = sig, new
        beta_prev = beta
        k += 1


def _zeta_from_interleaved(coefs):
    """Forward solve zeta from alpha_1, beta_1, ...: zeta_1 = alpha_1, zeta_2 = beta_1 / zeta_1, ..."""
    prev = 0
    for pos, c in enumerate(coefs):
        zeta = c - prev if pos % 2 == 0 else c / prev
        yield zeta
        prev = zeta


def _coordinates_from_interleaved(space, coefs):
    """Lazily map interleaved recursion coefficients to canonical coordinates."""
    if isinstance(space, RealLine):
        yield from coefs
        return
    if isinstance(space, HalfLine):
        yield from _zeta_from_interleaved(coefs)
        return
    a, b = _exact(space.a), _exact(space.b)
    width = b - a

    def normalised():
        for pos, c in enumerate(coefs):
            yield (c - a) / width if pos % 2 == 0 else c / (width * width)

    q_prev = 1
    for zeta in _zeta_from_interleaved(normalised()):
        p = zeta / q_prev
        yield p
        q_prev = 1 - p


def _classify(space, j, y, margin):
    if isinstance(space, Compact):
        if margin < y < 1 - margin:
            return Membership.INTERIOR
        if -margin <= y <= margin or 1 - margin <= y <= 1 + margin:
            return Membership.BOUNDARY
        return Membership.OUTSIDE
    if isinstance(space, RealLine) and j % 2 == 1:
        return Membership.INTERIOR
    if y > margin:
        return Membership.INTERIOR
    if y >= -margin:
        return Membership.BOUNDARY
    return Membership.OUTSIDE


# ---------------------------------------------------------------------------
# public transforms


def _values(obj):
    if isinstance(obj, (MomentVector, CanonicalCoordinates)):
        return obj.values
    return _exact_tuple(obj)


def _check_order(n, max_order):
    cap = MAX_ORDER if max_order is None else max_order
    if n > cap:
        raise ValueError(f"order {n} exceeds the transform cap {cap}")


def canonical_to_recursion(space, coords, *, max_order=None):
    """Recursion coefficients determined by ``n`` canonical coordinates.

    Returns ``ceil(n/2)`` alphas and ``floor(n/2)`` betas.  On ``[a, b]``::

        alpha_j = a + (b-a) (q_{2j-3} p_{2j-2} + q_{2j-2} p_{2j-1})
        beta_j  = (b-a)^2 q_{2j-2} p_{2j-1} q_{2j-1} p_{2j}

    with ``p_{-1} = p_0 = 0``; on the half line ``alpha_j = z_{2j-2} + z_{2j-1}``,
    ``beta_j = z_{2j-1} z_{2j}`` with ``z_0 = 0``; on R the identity.
    """
    _check_space(space)
    y = CanonicalCoordinates(space, _values(coords)).values
    if not y:
        raise ArityError("need at least one coordinate")
    _check_order(len(y), max_order)
    if isinstance(space, Compact):
        alpha, beta = _coords_to_recursion(space, y, _exact(space.a), _exact(space.b))
    else:
        alpha, beta = _coords_to_recursion(space, y)
    return RecursionCoefficients(tuple(alpha), tuple(beta))


def recursion_to_moments(rc, k, space=REAL_LINE):
    """First ``k`` moments from recursion coefficients.

    Needs ``ceil(k/2)`` alphas and ``floor(k/2)`` betas; surplus entries are
    ignored.
    """
    if k < 1:
        raise ArityError("k must be at least 1")
    need_a, need_b = (k + 1) // 2, k // 2
    if len(rc.alpha) < need_a or len(rc.beta) < need_b:
        raise ArityError(
            f"{k} moments need {need_a} alphas and {need_b} betas, "
            f"got {len(rc.alpha)} and {len(rc.beta)}")
    return MomentVector(space, _recursion_moments(rc.alpha, rc.beta, k))


def moments_to_recursion(m):
    """Recursion coefficients of a moment vector (Chebyshev algorithm).

    ``n`` moments give ``ceil(n/2)`` alphas and ``floor(n/2)`` betas.  A
    non-positive beta means the Hankel matrix is singular or indefinite and
    raises :class:`BoundaryError` (or :class:`NotAMeasureError` if negative).
    """
    if not isinstance(m, MomentVector):
        m = MomentVector(REAL_LINE, m)
    if not m.values:
        raise ArityError("empty moment vector")
    alpha, beta = [], []
    for pos, c in enumerate(_chebyshev(m.values)):
        if pos % 2 == 0:
            alpha.append(c)
            continue
        j = pos // 2 + 1
        if c == 0:
            raise BoundaryError(f"beta_{j} = 0: singular Hankel matrix", index=pos + 1)
        if c < 0:
            raise NotAMeasureError(f"beta_{j} < 0: not a moment sequence", index=pos + 1)
        beta.append(c)
    return RecursionCoefficients(tuple(alpha), tuple(beta))


def recursion_to_canonical(space, rc):
    """Inverse of :func:`canonical_to_recursion` (forward solve)."""
    _check_space(space)
    coefs = rc.interleaved()
    if len(coefs) != len(rc):
        raise ArityError("alpha/beta lengths inconsistent with an interleaved vector")
    out = []
    for j, y in enumerate(_coordinates_from_interleaved(space, iter(coefs)), start=1):
        if not _coordinate_ok(space, j, y):
            raise NotAMeasureError(
                f"coordinate {j} = {float(y)!r} outside its domain: "
                f"not the recursion data of a measure on {space}", index=j)
        out.append(y)
    return CanonicalCoordinates(space, out)


def canonical_to_moments(space, coords, *, method="jacobi", max_order=None):
    """The map from canonical coordinates to ordinary moments.

    ``method="g"`` selects the g_{i,j} double-sequence route (half line only).
    """
    _check_space(space)
    cc = CanonicalCoordinates(space, _values(coords))
    n = len(cc)
    if n == 0:
        raise ArityError("need at least one coordinate")
    _check_order(n, max_order)
    if method == "g":
        if not isinstance(space, HalfLine):
            raise ValueError("the g-recursion route exists for the half line only")
        return MomentVector(space, _g_moments(cc.values, n))
    if method != "jacobi":
        raise ValueError(f"unknown method {method!r}")
    rc = canonical_to_recursion(space, cc, max_order=max_order)
    return recursion_to_moments(rc, n, space)


def moments_to_canonical(space, m, *, max_order=None):
    """Inverse of :func:`canonical_to_moments`.

    Raises :class:`BoundaryError` or :class:`NotAMeasureError` naming the first
    coordinate that leaves its domain.
    """
    _check_space(space)
    values = _values(m)
    if not values:
        raise ArityError("empty moment vector")
    _check_order(len(values), max_order)
    out = []
    coords = _coordinates_from_interleaved(space, _chebyshev(values))
    for j, y in enumerate(coords, start=1):
        status = _classify(space, j, y, 0)
        if status is Membership.BOUNDARY:
            raise BoundaryError(f"coordinate {j} on the boundary of its domain", index=j)
        if status is Membership.OUTSIDE:
            raise NotAMeasureError(f"coordinate {j} = {float(y)!r} outside its domain", index=j)
        out.append(y)
    return CanonicalCoordinates(space, out)


@dataclass(frozen=True)
class MembershipReport:
    status: Membership
    index: int | None = None
    coordinates: tuple = ()


def in_moment_space(space, m, margin=INTERIOR_MARGIN):
    """Classify a moment vector as interior, boundary or outside.

    Interior means every canonical coordinate lies inside its domain by more
    than ``margin``.  ``index`` names the first failing coordinate.
    """
    _check_space(space)
    try:
        values = _values(m)
    except (ValueError, TypeError):
        return MembershipReport(Membership.OUTSIDE, 1)
    if not values:
        return MembershipReport(Membership.INTERIOR)
    margin = _exact(margin)
    seen = []
    for j, y in enumerate(_coordinates_from_interleaved(space, _chebyshev(values)), start=1):
        status = _classify(space, j, y, margin)
        if status is not Membership.INTERIOR:
            return MembershipReport(status, j, tuple(seen))
        seen.append(y)
    return MembershipReport(Membership.INTERIOR, None, tuple(seen))


# ---------------------------------------------------------------------------
# float paths: batches and derivatives


def canonical_to_moments_batch(space, coords):
    """Vectorised float map for an array of shape ``(count, k)``.

    Columns are treated as scalars of the generic recursions, so no
    validation happens here; callers supply interior coordinates.
    """
    y = np.asarray(coords, dtype=float)
    if y.ndim != 2:
        raise ValueError("expected a 2-d array (count, k)")
    count, k = y.shape
    if k == 0:
        return np.empty((count, 0))
    cols = [y[:, j] for j in range(k)]
    if isinstance(space, Compact):
        alpha, beta = _coords_to_recursion(space, cols, float(space.a), float(space.b))
    else:
        alpha, beta = _coords_to_recursion(space, cols)
    moments = _recursion_moments(alpha, beta, k)
    return np.column_stack([np.broadcast_to(mk, (count,)) for mk in moments])


def jacobian_matrix(space, coords, k=None):
    """Lower-triangular ``k x k`` matrix ``D[i, r] = d m_{i+1} / d y_{r+1}``.

    Derivatives are exact up to roundoff: dual numbers are pushed through the
    same recursions that produce the moments.
    """
    _check_space(space)
    y = [float(v) for v in _values(coords)]
    k = len(y) if k is None else k
    if k < 1 or len(y) < k:
        raise ArityError(f"need at least {k} coordinates, got {len(y)}")
    y = y[:k]
    for j, v in enumerate(y, start=1):
        if not _coordinate_ok(space, j, v):
            raise DomainError(f"coordinate {j} = {v!r} outside its domain", index=j)
    duals = Dual.variables(y)
    if isinstance(space, Compact):
        alpha, beta = _coords_to_recursion(space, duals, float(space.a), float(space.b))
    else:
        alpha, beta = _coords_to_recursion(space, duals)
    moments = _recursion_moments(alpha, beta, k)
    return np.array([m.grad for m in moments])


def jacobian_det(space, n, coords):
    """Closed-form determinant of the order-``n`` coordinate map.

    * ``[a, b]``: ``(b-a)^{n(n+1)/2} prod_j (p_j q_j)^{n-j}``
    * half line: ``prod_k z_k^{n-k}``
    * real line: ``prod_i beta_i^{n-2i}`` (both parities of ``n``)
    """
    _check_space(space)
    y = [float(v) for v in _values(coords)]
    if len(y) < n:
        raise ArityError(f"need {n} coordinates, got {len(y)}")
    y = y[:n]
    for j, v in enumerate(y, start=1):
        if not _coordinate_ok(space, j, v):
            raise DomainError(f"coordinate {j} = {v!r} outside its domain", index=j)
    log_det = 0.0
    if isinstance(space, Compact):
        log_det = n * (n + 1) / 2 * math.log(space.length)
        for j, p in enumerate(y, start=1):
            log_det += (n - j) * math.log(p * (1 - p))
    elif isinstance(space, HalfLine):
        for j, z in enumerate(y, start=1):
            log_det += (n - j) * math.log(z)
    else:
        for j in range(2, n + 1, 2):
            log_det += (n - j) * math.log(y[j - 1])
    return math.exp(log_det)


def jacobian_weight_exponent(space, j, n):
    """Exponent of coordinate ``j`` in the order-``n`` Jacobian determinant.

    The weight function it multiplies is ``log(p(1-p))``, ``log z`` or
    ``log beta``; real-line alphas carry no weight.
    """
    if isinstance(space, RealLine) and j % 2 == 1:
        return 0
    return n - j


def constant_coordinates(y1, y2, k):
    """``(y1, y2, y1, y2, ...)`` of length ``k``."""
    return [y1 if j % 2 == 0 else y2 for j in range(k)]
