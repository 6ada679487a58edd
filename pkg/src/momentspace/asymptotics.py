"""Limit theorems for random moment vectors.

The canonical coordinates of a random order-``n`` moment vector concentrate
at the minimizers of the functions

    compact     W_i(p) = V_i(p) - log(p (1 - p))
    half line   W_i(z) = V_i(z) - log z
    real line   W_1(alpha) = V_1(alpha),   W_2(beta) = V_2(beta) - log beta

with ``i = 1`` for odd and ``i = 2`` for even coordinates.  The truncated
moment vector then satisfies a law of large numbers with limit ``m*``, a
central limit theorem with covariance ``Sigma_k = D diag(1/W'') D^T`` (``D``
is the Jacobian of the coordinate-to-moment map at the minimizers), and
moderate and large deviation principles.  This module computes these
objects and runs Monte Carlo and quadrature experiments against them.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy import integrate, optimize

from . import coords
from .coords import Compact, HalfLine, Membership, RealLine
from .errors import NonUniqueMinimizerError, NumericError
from .measures import limit_measure_from_minimizers
from .sampling import (PotentialSpec, _as_pair, _tabulate, coordinate_density,
                       sample_moment_vector)

SCAN_NODES = 256
# minima with a smaller second derivative are treated as flat
FLAT_W2 = 1e-8
MAX_EXPERIMENT_K = 8


@dataclass(frozen=True)
class WFunction:
    """``W`` for one parity (``1`` odd, ``2`` even) of canonical coordinates."""

    space: object
    parity: int
    V: PotentialSpec

    def __post_init__(self):
        if self.parity not in (1, 2):
            raise ValueError("parity must be 1 or 2")

    @property
    def kind(self):
        if isinstance(self.space, Compact):
            return "compact"
        if isinstance(self.space, HalfLine):
            return "log"
        if isinstance(self.space, RealLine):
            return "alpha" if self.parity == 1 else "log"
        raise TypeError(f"not a moment space: {self.space!r}")

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "compact":
                return self.V(y) - np.log(y) - np.log1p(-y)
            if self.kind == "log":
                return self.V(y) - np.log(y)
            return self.V(y)

    def derivative(self, y, order=1):
        y = np.asarray(y, dtype=float)
        out = self.V.derivative(y, order=order)
        # d^r/dy^r of -log y is (-1)^r (r-1)! / y^r
        f = math.factorial(order - 1)
        if self.kind in ("compact", "log"):
            out = out + (-1) ** order * f / y ** order
        if self.kind == "compact":
            out = out + f / (1 - y) ** order
        return out

    def second_derivative(self, y):
        return self.derivative(y, order=2)

    def scan_grid(self):
        if self.kind == "compact":
            return (np.arange(SCAN_NODES) + 0.5) / SCAN_NODES
        if self.kind == "log":
            return np.logspace(-8, 8, SCAN_NODES)
        return np.linspace(-100.0, 100.0, SCAN_NODES)


@dataclass(frozen=True)
class MinimizerResult:
    y_star: float
    w2: float
    bracket: tuple


def _w_functions(space, V):
    v1, v2 = _as_pair(V)
    return WFunction(space, 1, v1), WFunction(space, 2, v2)


def minimize_w(W, rtol=1e-9):
    """Global minimizer of ``W`` by grid scan then bisection on ``W'``.

    Raises :class:`NonUniqueMinimizerError` when two separated local minima on
    the scan grid have equal values up to ``rtol`` (best effort), and
    :class:`NumericError` when ``W''`` at the minimizer is not above ``FLAT_W2``.
    """
    grid = W.scan_grid()
    with np.errstate(all="ignore"):
        vals = W(grid)
    vals = np.where(np.isfinite(vals), vals, np.inf)
    i = int(np.argmin(vals))
    if not math.isfinite(vals[i]):
        raise NumericError("W is nowhere finite on the scan grid")
    # local minima on the grid, compared with the global one
    interior = np.arange(1, len(grid) - 1)
    local = interior[(vals[interior] <= vals[interior - 1]) & (vals[interior] <= vals[interior + 1])]
    for idx in local:
        if abs(int(idx) - i) > 1 and abs(vals[idx] - vals[i]) <= rtol * max(1.0, abs(vals[i])):
            raise NonUniqueMinimizerError(
                f"W has separated minima near {grid[i]:.6g} and {grid[idx]:.6g}")

    lo = grid[i - 1] if i > 0 else None
    hi = grid[i + 1] if i < len(grid) - 1 else None
    dW = lambda y: float(W.derivative(y))
    if lo is None:
        lo = grid[0]
        while dW(lo) > 0:
            lo = lo / 2 if W.kind != "alpha" else lo * 2 - 1
            if W.kind == "compact" and lo < 1e-300:
                raise NumericError("minimizer runs into the left boundary")
    if hi is None:
        hi = grid[-1]
        while dW(hi) < 0:
            hi = (1 + hi) / 2 if W.kind == "compact" else hi * 2 + 1
            if not math.isfinite(hi) or (W.kind == "compact" and hi >= 1):
                raise NumericError("minimizer runs into the right boundary")
    if dW(lo) > 0 or dW(hi) < 0:
        raise NumericError("failed to bracket a zero of W'")
    try:
        y = optimize.brentq(dW, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=1000)
    except RuntimeError as exc:
        raise NumericError(f"bisection on W' failed: {exc}") from None
    w2 = float(W.second_derivative(y))
    if not w2 > FLAT_W2:
        raise NumericError(f"W'' = {w2:.3g} at the minimizer; flat or degenerate minimum")
    return MinimizerResult(float(y), w2, (float(lo), float(hi)))


def minimizers(space, V):
    """``(MinimizerResult for W1, MinimizerResult for W2)``."""
    w1, w2 = _w_functions(space, V)
    return minimize_w(w1), minimize_w(w2)


def limit_measure(space, V):
    r1, r2 = minimizers(space, V)
    return limit_measure_from_minimizers(space, r1.y_star, r2.y_star)


def limiting_moments(space, V, k):
    """``m*_1..m*_k``: moments of the limit measure."""
    r1, r2 = minimizers(space, V)
    y = coords.constant_coordinates(r1.y_star, r2.y_star, k)
    return coords.canonical_to_moments(space, y, max_order=max(k, coords.MAX_ORDER))


def _derivative_setup(space, V, k):
    r1, r2 = minimizers(space, V)
    y = coords.constant_coordinates(r1.y_star, r2.y_star, k)
    D = coords.jacobian_matrix(space, y, k)
    h = np.array([r1.w2 if j % 2 == 0 else r2.w2 for j in range(k)])
    return D, h


def clt_covariance(space, V, k):
    """``Sigma_k = D diag(1/W''(y*)) D^T`` with ``D[i, r] = dm_i/dy_r`` at the minimizers."""
    D, h = _derivative_setup(space, V, k)
    sigma = (D / h) @ D.T
    return 0.5 * (sigma + sigma.T)


def ldp_rate(space, V, m):
    """Large-deviation rate ``sum_j W(y_j) - W(y*)``; infinite off the interior."""
    values = m.values if isinstance(m, coords.MomentVector) else tuple(Fraction(float(v)) for v in m)
    report = coords.in_moment_space(space, values, margin=0)
    if report.status is not Membership.INTERIOR:
        return math.inf
    w1, w2 = _w_functions(space, V)
    r1, r2 = minimize_w(w1), minimize_w(w2)
    w1_star, w2_star = float(w1(r1.y_star)), float(w2(r2.y_star))
    total = 0.0
    for j, y in enumerate(report.coordinates, start=1):
        if j % 2:
            total += float(w1(float(y))) - w1_star
        else:
            total += float(w2(float(y))) - w2_star
    return max(total, 0.0)


def mdp_rate(space, V, x):
    """Moderate-deviation rate ``0.5 |diag(W'')^(1/2) D^(-1) x|^2``."""
    x = np.asarray(x, dtype=float)
    D, h = _derivative_setup(space, V, len(x))
    u = np.linalg.solve(D, x)
    return 0.5 * float(np.sum(h * u * u))


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentReport:
    name: str
    parameters: dict
    estimates: dict = field(default_factory=dict)
    targets: dict = field(default_factory=dict)
    deviations: dict = field(default_factory=dict)
    criteria: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    wall_clock_s: float = 0.0

    @property
    def passed(self):
        """``True``/``False``; ``None`` when no criterion was evaluated."""
        if not self.criteria:
            return None
        return all(self.criteria.values())

    def to_dict(self):
        def clean(v):
            if isinstance(v, np.ndarray):
                return clean(v.tolist())
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            if isinstance(v, dict):
                return {str(a): clean(b) for a, b in v.items()}
            if isinstance(v, (np.floating, Fraction)):
                return float(v)
            if isinstance(v, (np.integer,)):
                return int(v)
            if isinstance(v, np.bool_):
                return bool(v)
            if isinstance(v, float) and not math.isfinite(v):
                return str(v)
            return v
        out = clean(asdict(self))
        out["passed"] = self.passed
        return out


def _space_label(space):
    if isinstance(space, Compact):
        return {"space": "compact", "a": float(space.a), "b": float(space.b)}
    return {"space": "halfline" if isinstance(space, HalfLine) else "realline"}


def _potential_label(V):
    v1, v2 = _as_pair(V)
    return {"v1": asdict(v1), "v2": asdict(v2)}


def _check_k(k, n):
    if not 1 <= k <= min(MAX_EXPERIMENT_K, n):
        raise ValueError(f"experiments need 1 <= k <= {MAX_EXPERIMENT_K} and k <= n")


def _bootstrap_se(x, seed, replicates=200):
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0xB007])))
    count = x.shape[0]
    means = np.empty((replicates, x.shape[1]))
    for b in range(replicates):
        means[b] = x[gen.integers(0, count, count)].mean(axis=0)
    return means.std(axis=0, ddof=1)


def run_lln_experiment(space, V, n, count, k, seed, z_max=4.0, threads=None):
    """Monte Carlo check of the law of large numbers in mean.

    Reports ``|mean m_i - m*_i|`` with bootstrap standard errors; passes when
    every deviation is below ``z_max`` standard errors.  Fewer than two
    replicates give a report without criteria.
    """
    _check_k(k, n)
    t0 = time.perf_counter()
    params = {**_space_label(space), **_potential_label(V), "n": n, "count": count,
              "k": k, "seed": seed}
    report = ExperimentReport("lln", params)
    target = np.array([float(v) for v in limiting_moments(space, V, k).values])
    report.targets["m_star"] = target
    batch = sample_moment_vector(space, n, V, seed, count, k=k, threads=threads)
    if count < 2:
        report.notes.append("insufficient replicates")
        report.wall_clock_s = time.perf_counter() - t0
        return report
    mean = batch.moments.mean(axis=0)
    se = _bootstrap_se(batch.moments, seed)
    dev = np.abs(mean - target)
    report.estimates.update(mean=mean, standard_error=se)
    report.deviations.update(abs_error=dev, z=dev / se, sup_error=float(dev.max()))
    report.criteria["within_z_max"] = bool(np.all(dev < z_max * se))
    report.wall_clock_s = time.perf_counter() - t0
    return report


def run_clt_experiment(space, V, n, count, k, seed, rel_tol=0.10, z_max=4.0, threads=None):
    """Empirical covariance of ``sqrt(n)(m - m*)`` against ``Sigma_k``.

    Centres at the known ``m*``.  Passes when the relative Frobenius error is
    below ``rel_tol`` and every mean is within ``z_max`` standard errors of
    ``m*``.  The sample-mean-centred covariance is reported as a diagnostic.
    """
    _check_k(k, n)
    t0 = time.perf_counter()
    params = {**_space_label(space), **_potential_label(V), "n": n, "count": count,
              "k": k, "seed": seed}
    report = ExperimentReport("clt", params)
    target = np.array([float(v) for v in limiting_moments(space, V, k).values])
    sigma = clt_covariance(space, V, k)
    report.targets.update(m_star=target, sigma=sigma)
    batch = sample_moment_vector(space, n, V, seed, count, k=k, threads=threads)
    if count < 2:
        report.notes.append("insufficient replicates")
        report.wall_clock_s = time.perf_counter() - t0
        return report
    x = math.sqrt(n) * (batch.moments - target)
    emp = x.T @ x / count
    products = x[:, :, None] * x[:, None, :]
    entry_se = products.std(axis=0, ddof=1) / math.sqrt(count)
    rel = float(np.linalg.norm(emp - sigma) / np.linalg.norm(sigma))
    mean = batch.moments.mean(axis=0)
    se = batch.moments.std(axis=0, ddof=1) / math.sqrt(count)
    mean_z = (mean - target) / se
    report.estimates.update(covariance=emp, covariance_sample_centred=np.cov(x, rowvar=False, ddof=1).reshape(k, k),
                            mean=mean, standard_error=se)
    report.deviations.update(relative_frobenius=rel, entry_z=(emp - sigma) / entry_se, mean_z=mean_z)
    report.criteria["covariance_rel_frobenius"] = rel < rel_tol
    report.criteria["mean_within_z_max"] = bool(np.all(np.abs(mean_z) < z_max))
    report.wall_clock_s = time.perf_counter() - t0
    return report


def log_tail_probability(space, V, n, c):
    """``log P_n(y_1 > c)`` for the first canonical coordinate by quadrature.

    Far tails are integrated relative to the log density at ``c`` over a
    window scaled by its slope there, so exponentially small probabilities do
    not underflow.
    """
    d = coordinate_density(space, 1, n, V)
    tab = _tabulate(d)
    lo_dom, hi_dom = d.domain
    if not lo_dom < c < hi_dom:
        return 0.0 if c <= lo_dom else -math.inf
    f = lambda t: float(d.log_unnormalized(t))
    log_total = tab.log_mass  # tabulated normaliser, cross-checked below
    lo_u, hi_u = tab.bounds
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        total, _ = integrate.quad(lambda u: math.exp(float(d.log_density_u(u)) - tab.log_peak),
                                  lo_u, hi_u, points=[tab.mode], limit=400, epsabs=0.0, epsrel=1e-11)
        log_total = tab.log_peak + math.log(total)
        fc = f(c)
        if fc > tab.log_peak - 30.0 or c <= float(d.to_coordinate(tab.mode)):
            u_c = float(np.log(c) - np.log1p(-c)) if d.kind == "logit" else (
                math.log(c) if d.kind == "log" else c)
            if u_c >= hi_u:
                return -math.inf
            pts = [tab.mode] if max(u_c, lo_u) < tab.mode < hi_u else None
            part, _ = integrate.quad(lambda u: math.exp(float(d.log_density_u(u)) - tab.log_peak),
                                     max(u_c, lo_u), hi_u, points=pts, limit=400,
                                     epsabs=0.0, epsrel=1e-11)
            return tab.log_peak + math.log(part) - log_total
        h = 1e-6 * max(1.0, abs(c))
        slope = -(f(c + h) - f(c - h)) / (2 * h)
        if not slope > 0:
            raise NumericError("tail window needs a decreasing log density at c")
        width = 80.0 / slope
        end = min(c + width, hi_dom if math.isfinite(hi_dom) else c + width)
        pts = [min(c + 2.0 ** r / slope, end) for r in range(0, 7)]
        pts = sorted(set(p for p in pts if c < p < end))
        part, _ = integrate.quad(lambda t: math.exp(f(t) - fc), c, end, points=pts or None,
                                 limit=400, epsabs=0.0, epsrel=1e-11)
    return fc + math.log(part) - log_total


def run_ldp_check(space, V, c, n_grid=(125, 500, 2000), tol=0.01):
    """Compare ``(1/n) log P_n(y_1 > c)`` with ``-inf_{y > c} (W_1(y) - W_1(y_1*))``.

    Exact quadrature of the one-dimensional marginal; no sampling.  Passes
    when the exponent at the largest ``n`` is within ``tol`` of the target
    and the error shrinks along ``n_grid``.
    """
    t0 = time.perf_counter()
    n_grid = sorted(int(n) for n in n_grid)
    params = {**_space_label(space), **_potential_label(V), "c": c, "n_grid": n_grid}
    report = ExperimentReport("ldp", params)
    w1, _ = _w_functions(space, V)
    r1 = minimize_w(w1)
    if c <= r1.y_star:
        target = 0.0
    else:
        target = -(float(w1(c)) - float(w1(r1.y_star)))
    exponents = np.array([log_tail_probability(space, V, n, c) / n for n in n_grid])
    errors = np.abs(exponents - target)
    report.targets["exponent"] = target
    report.estimates["exponents"] = exponents
    report.deviations["abs_error"] = errors
    report.criteria["final_within_tol"] = bool(errors[-1] < tol)
    if len(n_grid) > 1:
        report.criteria["error_decreasing"] = bool(np.all(np.diff(errors) < 0)) or bool(errors[-1] < 1e-3)
    report.wall_clock_s = time.perf_counter() - t0
    return report
