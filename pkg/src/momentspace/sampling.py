"""Random moment vectors via independent canonical coordinates.

Under the ensembles considered here the canonical coordinates of a random
moment vector of order ``n`` are independent.  Coordinate ``j`` has density

    exp(-n V(t)) * weight(t)^(n - j)

on its domain.  ``V`` is ``V1`` for odd ``j`` and ``V2`` for even ``j``.  The
weight is ``p(1-p)`` on a compact interval and ``z`` on the half line.  On
the real line the coordinates interleave ``alpha_1, beta_1, alpha_2, ...``;
alphas carry no weight and ``beta_i`` carries ``beta^(n-2i)``.

Each marginal is tabulated once on a 2048-node grid in a transformed variable
(logit, log or identity) and sampled by inverse CDF.  Random numbers come from
numpy's counter-based Philox generator keyed by ``(seed, j, chunk)``.  Draws
therefore do not depend on how chunks are scheduled across threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize
from scipy.special import expit, logsumexp

from . import coords
from .coords import Compact, HalfLine, RealLine
from .errors import NonNormalizablePotentialError, NumericError

GRID_NODES = 2048
TRUNCATION_NATS = 60.0
CHUNK = 4096
THREADS_ENV = "MOMENT_SPACE_THREADS"


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class PotentialSpec:
    """``V(t) = sum c_i t^i + log_left log(t - L) + log_right log(R - t)``.

    ``L`` and ``R`` are the ends of the coordinate domain: ``(0, 1)`` for
    compact canonical moments and ``(0, inf)`` for half-line coordinates and
    betas.  Alphas on the real line admit no log terms.
    """

    poly: tuple = (0.0,)
    log_left: float = 0.0
    log_right: float = 0.0

    def __post_init__(self):
        poly = tuple(float(c) for c in self.poly) or (0.0,)
        if not all(math.isfinite(c) for c in poly):
            raise ValueError("potential coefficients must be finite")
        object.__setattr__(self, "poly", poly)
        object.__setattr__(self, "log_left", float(self.log_left))
        object.__setattr__(self, "log_right", float(self.log_right))

    @classmethod
    def parse(cls, text):
        """Parse ``"c0,c1,...[;logL=x][;logR=y]"``."""
        parts = [p.strip() for p in str(text).split(";") if p.strip()]
        poly, left, right = (0.0,), 0.0, 0.0
        for part in parts:
            key, sep, val = part.partition("=")
            if sep:
                key = key.strip().lower()
                if key in ("logl", "log_left"):
                    left = float(val)
                elif key in ("logr", "log_right"):
                    right = float(val)
                else:
                    raise ValueError(f"unknown potential term {key!r}")
            else:
                poly = tuple(float(c) for c in part.split(","))
        return cls(poly, left, right)

    @property
    def degree(self):
        d = len(self.poly) - 1
        while d > 0 and self.poly[d] == 0.0:
            d -= 1
        return d

    @property
    def leading(self):
        return self.poly[self.degree]

    def __call__(self, t, right=1.0):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            out = np.polynomial.polynomial.polyval(t, self.poly)
            if self.log_left:
                out = out + self.log_left * np.log(t)
            if self.log_right:
                out = out + self.log_right * np.log(right - t)
        return out

    def derivative(self, t, right=1.0, order=1):
        t = np.asarray(t, dtype=float)
        dp = np.polynomial.polynomial.polyder(self.poly, order) if len(self.poly) > order else [0.0]
        out = np.polynomial.polynomial.polyval(t, dp)
        sign = -1.0 if order % 2 == 0 else 1.0
        fact = math.factorial(order - 1)
        if self.log_left:
            out = out + sign * fact * self.log_left / t ** order
        if self.log_right:
            out = out - fact * self.log_right / (right - t) ** order
        return out


def _as_pair(V):
    if V is None:
        return PotentialSpec(), PotentialSpec()
    if isinstance(V, PotentialSpec):
        return V, V
    if isinstance(V, (str, int, float)):
        v = PotentialSpec.parse(V)
        return v, v
    v1, v2 = V
    v1 = v1 if isinstance(v1, PotentialSpec) else PotentialSpec.parse(v1)
    v2 = v2 if isinstance(v2, PotentialSpec) else PotentialSpec.parse(v2)
    return v1, v2


def _kind(space, j):
    if isinstance(space, Compact):
        return "logit"
    if isinstance(space, HalfLine):
        return "log"
    if isinstance(space, RealLine):
        return "identity" if j % 2 == 1 else "log"
    raise TypeError(f"not a moment space: {space!r}")


def check_growth(space, j, n, V):
    """Raise :class:`NonNormalizablePotentialError` unless the marginal integrates.

    Unbounded ends need enough growth of ``V``: half line, polynomial part of
    degree >= 1 with positive leading coefficient or ``log_left > 2``; betas,
    the same with ``log_left > 3``; alphas, even degree >= 2 with positive
    leading coefficient.  Finite ends need ``w - n c > -1`` where ``w`` is the
    Jacobian exponent and ``c`` the log coefficient there.
    """
    kind = _kind(space, j)
    w = coords.jacobian_weight_exponent(space, j, n)
    deg, lead = V.degree, V.leading
    if kind == "identity":
        if V.log_left or V.log_right:
            raise NonNormalizablePotentialError("alpha potentials cannot carry log terms")
        if not (deg >= 2 and deg % 2 == 0 and lead > 0):
            raise NonNormalizablePotentialError(
                "alpha potential needs even degree >= 2 and positive leading coefficient")
        return
    if kind == "log":
        if V.log_right:
            raise NonNormalizablePotentialError("log_right is only defined on a compact interval")
        need = 3.0 if isinstance(space, RealLine) else 2.0
        if not ((deg >= 1 and lead > 0) or V.log_left > need):
            raise NonNormalizablePotentialError(
                f"potential grows too slowly at infinity (need positive polynomial growth "
                f"or log coefficient > {need:g})")
        if w - n * V.log_left <= -1:
            raise NonNormalizablePotentialError(f"coordinate {j} is not integrable at 0")
        return
    if w - n * V.log_left <= -1 or w - n * V.log_right <= -1:
        raise NonNormalizablePotentialError(f"coordinate {j} is not integrable at an endpoint")


# ---------------------------------------------------------------------------
# one-dimensional marginals


@dataclass(frozen=True)
class CoordinateDensity:
    """Unnormalised marginal of canonical coordinate ``j`` at order ``n``.

    ``log_unnormalized(t) = -n V(t) + w log(weight(t))``.
    """

    space: object
    j: int
    n: int
    potential: PotentialSpec
    weight_exponent: int

    @property
    def kind(self):
        return _kind(self.space, self.j)

    @property
    def domain(self):
        return {"logit": (0.0, 1.0), "log": (0.0, math.inf),
                "identity": (-math.inf, math.inf)}[self.kind]

    def log_unnormalized(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            out = -self.n * self.potential(t)
            w = self.weight_exponent
            if w:
                if self.kind == "logit":
                    out = out + w * (np.log(t) + np.log1p(-t))
                else:
                    out = out + w * np.log(t)
        return np.where(np.isnan(out), -np.inf, out)

    def to_coordinate(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "logit":
            return expit(u)
        if self.kind == "log":
            with np.errstate(over="ignore"):
                return np.exp(u)
        return u

    def log_density_u(self, u):
        """Log density in the transformed variable, including ``dt/du``."""
        u = np.asarray(u, dtype=float)
        t = self.to_coordinate(u)
        out = self.log_unnormalized(t)
        if self.kind == "logit":
            out = out - np.logaddexp(0.0, u) - np.logaddexp(0.0, -u)
        elif self.kind == "log":
            out = out + u
        return np.where(np.isnan(out), -np.inf, out)


def coordinate_density(space, j, n, V):
    """Marginal density of coordinate ``j`` for ``V = (V1, V2)`` (or one spec for both)."""
    if not 1 <= j <= n:
        raise ValueError(f"need 1 <= j <= n, got j={j}, n={n}")
    v1, v2 = _as_pair(V)
    spec = v1 if j % 2 == 1 else v2
    check_growth(space, j, n, spec)
    w = coords.jacobian_weight_exponent(space, j, n)
    return CoordinateDensity(space, j, n, spec, w)


@dataclass(frozen=True)
class _Table:
    u: np.ndarray
    cdf: np.ndarray
    delta: np.ndarray
    mode: float
    log_peak: float
    log_mass: float

    @property
    def bounds(self):
        return float(self.u[0]), float(self.u[-1])


def _find_mode(d):
    f = d.log_density_u
    if d.kind == "identity":
        scan = np.sinh(np.linspace(-10.0, 10.0, 4001))
    else:
        scan = np.linspace(-80.0, 80.0, 4001)
    vals = f(scan)
    if not np.any(np.isfinite(vals)):
        raise NumericError("log density is nowhere finite")
    i = int(np.argmax(vals))
    lo, hi = scan[max(i - 1, 0)], scan[min(i + 1, len(scan) - 1)]
    res = optimize.minimize_scalar(lambda u: -float(f(u)), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12 * max(1.0, abs(scan[i]))})
    u0 = float(res.x) if -res.fun >= vals[i] else float(scan[i])
    return u0, float(f(u0))


def _cutoff(f, u0, f0, direction, scale):
    target = f0 - TRUNCATION_NATS
    step = scale
    u = u0
    for _ in range(200):
        nxt = u0 + direction * step
        if not f(nxt) > target:
            return optimize.brentq(lambda x: float(f(x)) - target, min(u, nxt), max(u, nxt),
                                   xtol=1e-12 * max(1.0, abs(u0)))
        u = nxt
        step *= 2.0
    raise NumericError("could not bracket the tail of the marginal")


def _log_cells(u, logp):
    """Log masses of cells on which the density is log-linear, and slopes ``delta``."""
    h = np.diff(u)
    delta = logp[1:] - logp[:-1]
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        # h e^{l0} (e^delta - 1) / delta, written stably for either sign of delta
        big = np.maximum(logp[:-1], logp[1:])
        small_side = np.where(delta > 0, -delta, delta)
        ratio = np.where(np.abs(delta) < 1e-12, 1.0, -np.expm1(small_side) / np.abs(delta))
        cells = np.log(h) + big + np.log(ratio)
    cells = np.where(np.isfinite(cells), cells, -np.inf)
    return cells, delta


@lru_cache(maxsize=512)
def _tabulate(d):
    f = d.log_density_u
    u0, f0 = _find_mode(d)
    if not math.isfinite(f0):
        raise NumericError("marginal peak is not finite")
    h = 1e-4 * max(1.0, abs(u0))
    curv = float(f(u0 + h) - 2 * f0 + f(u0 - h)) / (h * h)
    scale = 1.0 / math.sqrt(-curv) if curv < 0 and math.isfinite(curv) else 1.0
    lo = _cutoff(f, u0, f0, -1.0, scale)
    hi = _cutoff(f, u0, f0, 1.0, scale)

    def build(u):
        logp = f(u) - f0
        if not np.all(np.isfinite(logp[1:-1])):
            raise NumericError("log density overflowed on the tabulation grid")
        logp = np.where(np.isfinite(logp), logp, -np.inf)
        cells, delta = _log_cells(u, logp)
        log_mass = float(logsumexp(cells))
        if not math.isfinite(log_mass):
            raise NumericError("marginal has no mass on the tabulation grid")
        cdf = np.concatenate([[0.0], np.cumsum(np.exp(cells - log_mass))])
        cdf /= cdf[-1]
        return logp, cdf, delta, log_mass

    # first pass on a uniform grid, then half the nodes at its quantiles so
    # the bulk is resolved even when the 60-nat window is wide
    u1 = np.linspace(lo, hi, GRID_NODES)
    _, cdf1, _, _ = build(u1)
    half = GRID_NODES // 2
    q = np.interp(np.linspace(0.0, 1.0, GRID_NODES - half + 2)[1:-1], cdf1, u1)
    u = np.unique(np.concatenate([np.linspace(lo, hi, half), q]))
    logp, cdf, delta, log_mass = build(u)
    return _Table(u, cdf, delta, u0, f0, log_mass + f0)


def _cell_fraction(delta, t):
    """Share of a log-linear cell's mass left of relative position ``t``."""
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = np.where(np.abs(delta) < 1e-12, t, np.expm1(delta * t) / np.expm1(delta))
    return np.where(np.isfinite(out), out, np.where(delta > 0, (t >= 1).astype(float), 1.0))


def _cell_inverse(delta, r):
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = np.where(np.abs(delta) < 1e-12, r, np.log1p(r * np.expm1(delta)) / delta)
        # very steep cells: the mass sits at one end
        out = np.where(np.isfinite(out), out, np.where(delta > 0, 1.0, 0.0))
    return np.clip(out, 0.0, 1.0)


def _cdf_u(tab, u):
    u = np.asarray(u, dtype=float)
    i = np.clip(np.searchsorted(tab.u, u, side="right") - 1, 0, len(tab.u) - 2)
    h = tab.u[i + 1] - tab.u[i]
    t = np.clip((u - tab.u[i]) / h, 0.0, 1.0)
    out = tab.cdf[i] + (tab.cdf[i + 1] - tab.cdf[i]) * _cell_fraction(tab.delta[i], t)
    return np.where(u <= tab.u[0], 0.0, np.where(u >= tab.u[-1], 1.0, out))


def _quantile_u(tab, x):
    x = np.asarray(x, dtype=float)
    i = np.clip(np.searchsorted(tab.cdf, x, side="right") - 1, 0, len(tab.u) - 2)
    width = tab.cdf[i + 1] - tab.cdf[i]
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(width > 0, (x - tab.cdf[i]) / width, 0.0)
    t = _cell_inverse(tab.delta[i], np.clip(r, 0.0, 1.0))
    return tab.u[i] + t * (tab.u[i + 1] - tab.u[i])


def tabulated_cdf(d, t):
    """Tabulated CDF of the marginal at coordinate values ``t``."""
    tab = _tabulate(d)
    t = np.asarray(t, dtype=float)
    if d.kind == "logit":
        with np.errstate(divide="ignore"):
            u = np.log(t) - np.log1p(-t)
    elif d.kind == "log":
        with np.errstate(divide="ignore"):
            u = np.log(t)
    else:
        u = t
    return _cdf_u(tab, u)


def _clip_interior(d, t):
    lo, hi = d.domain
    if math.isfinite(lo):
        t = np.maximum(t, np.nextafter(lo, math.inf))
    if math.isfinite(hi):
        t = np.minimum(t, np.nextafter(hi, -math.inf))
    return t


def _uniforms(seed, j, chunk_index, size):
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(j), int(chunk_index)])
    return np.random.Generator(np.random.Philox(ss)).random(size)


def _threads():
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def sample_coordinate(d, seed, count, threads=None):
    """``count`` i.i.d. draws from the marginal ``d``; deterministic in ``seed``.

    Uniforms for coordinate ``j`` come in chunks of 4096 from a Philox stream
    keyed by ``(seed, j, chunk)``, so the result does not depend on ``threads``.
    """
    count = int(count)
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return np.empty(0)
    tab = _tabulate(d)
    nchunks = -(-count // CHUNK)

    def draw(c):
        size = min(CHUNK, count - c * CHUNK)
        x = _uniforms(seed, d.j, c, size)
        return _quantile_u(tab, x)

    workers = threads or _threads()
    if workers > 1 and nchunks > 1:
        with ThreadPoolExecutor(max_workers=min(workers, nchunks)) as pool:
            parts = list(pool.map(draw, range(nchunks)))
    else:
        parts = [draw(c) for c in range(nchunks)]
    return _clip_interior(d, d.to_coordinate(np.concatenate(parts)))


def exact_marginal_stats(d):
    """``(mean, variance, log_normalizer)`` of the marginal by adaptive quadrature.

    Independent of the tabulation grid; used as ground truth in tests.
    """
    tab = _tabulate(d)
    lo, hi = tab.bounds
    f0 = tab.log_peak

    def moment(r):
        g = lambda u: float(np.exp(d.log_density_u(u) - f0)) * float(d.to_coordinate(u)) ** r
        val, _ = integrate.quad(g, lo, hi, points=[tab.mode], limit=400,
                                epsabs=1e-14, epsrel=1e-10)
        return val

    z = moment(0)
    mean = moment(1) / z
    second = moment(2) / z
    var = second - mean * mean
    # recentre for accuracy when the mean is large compared to the spread
    g = lambda u: float(np.exp(d.log_density_u(u) - f0)) * (float(d.to_coordinate(u)) - mean) ** 2
    cvar, _ = integrate.quad(g, lo, hi, points=[tab.mode], limit=400, epsabs=1e-14, epsrel=1e-10)
    var = cvar / z if cvar > 0 else var
    return mean, var, f0 + math.log(z)


# ---------------------------------------------------------------------------
# moment vectors


@dataclass
class SampleBatch:
    """Sampled canonical coordinates and moments, one row per replicate.

    ``canonical`` and ``moments`` are float arrays of shape ``(count, k)``.
    :meth:`vectors` rebuilds exact :class:`~momentspace.coords.MomentVector`
    objects from the (exactly representable) float coordinates.
    """

    space: object
    n: int
    k: int
    seed: int
    canonical: np.ndarray
    moments: np.ndarray

    def __len__(self):
        return self.canonical.shape[0]

    def canonical_vectors(self):
        return [coords.CanonicalCoordinates(self.space, [Fraction(float(v)) for v in row])
                for row in self.canonical]

    def vectors(self):
        return [coords.canonical_to_moments(self.space, y) for y in self.canonical_vectors()]


def sample_moment_vector(space, n, V, seed, count, k=None, threads=None):
    """Draw ``count`` moment vectors of order ``n`` truncated to ``k`` moments.

    Only the first ``k`` canonical coordinates are drawn; their marginals
    still depend on ``n``.  ``k`` defaults to ``min(n, MAX_ORDER)`` and may
    not exceed either bound.
    """
    if n < 1:
        raise ValueError("n must be positive")
    k = min(n, coords.MAX_ORDER) if k is None else int(k)
    if not 1 <= k <= min(n, coords.MAX_ORDER):
        raise ValueError(f"k must lie in [1, min(n, {coords.MAX_ORDER})], got {k}")
    count = int(count)
    densities = [coordinate_density(space, j, n, V) for j in range(1, k + 1)]
    y = np.empty((count, k))
    for j, d in enumerate(densities):
        y[:, j] = sample_coordinate(d, seed, count, threads=threads)
    m = coords.canonical_to_moments_batch(space, y) if count else np.empty((0, k))
    return SampleBatch(space, n, k, int(seed), y, m)
