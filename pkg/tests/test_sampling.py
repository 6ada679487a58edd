import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import betaln

from momentspace.coords import HALF_LINE, REAL_LINE, Compact, Membership, in_moment_space
from momentspace.errors import NonNormalizablePotentialError
from momentspace.sampling import (PotentialSpec, coordinate_density, exact_marginal_stats,
                                  sample_coordinate, sample_moment_vector, tabulated_cdf)

UNIT = Compact(0, 1)
ZERO = PotentialSpec()
LINEAR = PotentialSpec((0.0, 1.0))
QUADRATIC = PotentialSpec((0.0, 0.0, 1.0))


def ks_statistic(x, cdf):
    x = np.sort(x)
    n = len(x)
    F = cdf(x)
    return max(np.max(np.arange(1, n + 1) / n - F), np.max(F - np.arange(n) / n))


def test_potential_parse():
    v = PotentialSpec.parse("1,2,3;logL=0.5;logR=0.25")
    assert v.poly == (1.0, 2.0, 3.0) and v.log_left == 0.5 and v.log_right == 0.25
    assert v(0.5) == pytest.approx(1 + 1 + 0.75 + 0.5 * math.log(0.5) + 0.25 * math.log(0.5))
    assert PotentialSpec.parse("0").degree == 0
    with pytest.raises(ValueError):
        PotentialSpec.parse("1;foo=2")


def test_potential_derivatives():
    v = PotentialSpec((0.3, -1.0, 2.0), log_left=0.4, log_right=-0.2)
    t, h = 0.37, 1e-5
    assert v.derivative(t) == pytest.approx((v(t + h) - v(t - h)) / (2 * h), rel=1e-8)
    assert v.derivative(t, order=2) == pytest.approx((v(t + h) - 2 * v(t) + v(t - h)) / h ** 2, rel=1e-4)


def test_growth_checks():
    with pytest.raises(NonNormalizablePotentialError):
        coordinate_density(HALF_LINE, 1, 10, ZERO)
    with pytest.raises(NonNormalizablePotentialError):
        coordinate_density(HALF_LINE, 1, 10, PotentialSpec((0.0, -1.0)))
    # V(z) = z - (c/n) log z is admissible: the log term only adds z^c
    coordinate_density(HALF_LINE, 1, 10, PotentialSpec((0.0, 1.0), log_left=-0.3))
    # a pure log potential passes the growth test at infinity but not at 0
    with pytest.raises(NonNormalizablePotentialError, match="at 0"):
        coordinate_density(HALF_LINE, 1, 10, PotentialSpec((0.0,), log_left=2.5))
    with pytest.raises(NonNormalizablePotentialError, match="too slowly"):
        coordinate_density(HALF_LINE, 1, 10, PotentialSpec((0.0,), log_left=1.5))
    with pytest.raises(NonNormalizablePotentialError):
        coordinate_density(REAL_LINE, 1, 10, LINEAR)
    with pytest.raises(NonNormalizablePotentialError):
        coordinate_density(REAL_LINE, 2, 10, PotentialSpec((0.0,), log_left=2.5))
    with pytest.raises(NonNormalizablePotentialError):
        coordinate_density(UNIT, 10, 10, PotentialSpec((0.0,), log_left=0.2))
    with pytest.raises(ValueError):
        coordinate_density(UNIT, 0, 10, ZERO)


@pytest.mark.parametrize("case", [
    (UNIT, 1, 50, ZERO, stats.beta(50, 50)),
    (UNIT, 3, 12, ZERO, stats.beta(10, 10)),
    (HALF_LINE, 100, 100, LINEAR, stats.expon(scale=0.01)),
    (HALF_LINE, 1, 200, LINEAR, stats.gamma(200, scale=1 / 200)),
    (REAL_LINE, 1, 2000, (QUADRATIC, LINEAR), stats.norm(scale=math.sqrt(1 / 4000))),
    (REAL_LINE, 2, 2000, (QUADRATIC, LINEAR), stats.gamma(1999, scale=1 / 2000)),
], ids=["beta50", "beta10", "expon", "gamma", "normal", "beta-coef"])
def test_marginals_match_scipy(case):
    space, j, n, V, ref = case
    d = coordinate_density(space, j, n, V)
    mean, var, _ = exact_marginal_stats(d)
    assert mean == pytest.approx(ref.mean(), rel=1e-8, abs=1e-12)
    assert var == pytest.approx(ref.var(), rel=1e-7)
    grid = ref.ppf(np.linspace(0.001, 0.999, 41))
    np.testing.assert_allclose(tabulated_cdf(d, grid), ref.cdf(grid), atol=2e-5)
    x = sample_coordinate(d, seed=0, count=100_000)
    assert ks_statistic(x, ref.cdf) < 1.63 / math.sqrt(len(x))


def test_uniform_streams_are_calibrated():
    # KS statistics of the raw streams should follow the Kolmogorov law
    d = coordinate_density(UNIT, 12, 12, ZERO)  # uniform marginal on (0, 1)
    ks = [stats.kstest(sample_coordinate(d, seed, 20_000), "uniform").statistic for seed in range(60)]
    assert stats.kstest(ks, stats.kstwo(20_000).cdf).pvalue > 1e-3


def test_sample_statistics_spec_cases():
    d = coordinate_density(UNIT, 1, 50, ZERO)
    x = sample_coordinate(d, 3, 100_000)
    assert abs(x.mean() - 0.5) < 0.005
    assert x.var() == pytest.approx(1 / 404, rel=0.1)
    d = coordinate_density(HALF_LINE, 100, 100, LINEAR)
    assert sample_coordinate(d, 3, 100_000).mean() == pytest.approx(0.01, rel=0.05)


def test_exact_stats_oracles():
    mean, var, _ = exact_marginal_stats(coordinate_density(HALF_LINE, 100, 100, LINEAR))
    assert var == pytest.approx(1e-4, rel=1e-8)
    mean, _, _ = exact_marginal_stats(coordinate_density(UNIT, 1, 100, LINEAR))
    assert mean < 0.5


def test_log_normalizer_against_beta_function():
    _, _, logz = exact_marginal_stats(coordinate_density(UNIT, 1, 50, ZERO))
    assert logz == pytest.approx(betaln(50, 50), rel=1e-10)


def test_determinism_and_thread_independence():
    d = coordinate_density(UNIT, 2, 30, PotentialSpec((0.0, 0.5)))
    a = sample_coordinate(d, 5, 10_000, threads=1)
    b = sample_coordinate(d, 5, 10_000, threads=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_coordinate(d, 6, 10_000))
    # prefixes agree: chunks are keyed by position, not by count
    assert np.array_equal(sample_coordinate(d, 5, 5000), a[:5000])


def test_env_thread_override(monkeypatch):
    d = coordinate_density(UNIT, 1, 30, ZERO)
    ref = sample_coordinate(d, 1, 9000)
    monkeypatch.setenv("MOMENT_SPACE_THREADS", "3")
    assert np.array_equal(sample_coordinate(d, 1, 9000), ref)


def test_moment_vectors_are_interior():
    batch = sample_moment_vector(UNIT, 200, None, 9, 20)
    assert batch.moments.shape == (20, 30)
    for v in batch.vectors()[:5]:
        assert in_moment_space(UNIT, v).status is Membership.INTERIOR
    batch = sample_moment_vector(REAL_LINE, 12, (QUADRATIC, LINEAR), 9, 5)
    for v in batch.vectors():
        assert in_moment_space(REAL_LINE, v).status is Membership.INTERIOR


def test_moment_vector_lln():
    batch = sample_moment_vector(UNIT, 200, None, 1, 500, k=3)
    assert abs(batch.moments[:, 0].mean() - 0.5) < 0.01
    batch = sample_moment_vector(HALF_LINE, 500, LINEAR, 1, 500, k=3)
    assert abs(batch.moments[:, 0].mean() - 1.0) < 0.01


def test_batch_determinism_and_empty():
    a = sample_moment_vector(HALF_LINE, 20, LINEAR, 4, 50)
    b = sample_moment_vector(HALF_LINE, 20, LINEAR, 4, 50)
    assert np.array_equal(a.moments, b.moments)
    empty = sample_moment_vector(HALF_LINE, 20, LINEAR, 4, 0)
    assert len(empty) == 0 and empty.moments.shape == (0, 20)
    with pytest.raises(ValueError):
        sample_moment_vector(UNIT, 10, None, 0, 1, k=11)
