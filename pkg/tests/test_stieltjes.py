import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from momentspace.coords import RecursionCoefficients
from momentspace.errors import ArityError, InversionError
from momentspace.measures import FreeBinomial, MarchenkoPastur, Semicircle
from momentspace.stieltjes import (EpsilonSchedule, UpperHalfPlanePoint, atom_mass, cf_convergent,
                                   hilbert_transform, invert_density, moments_from_transform,
                                   sqrt_branch)

from oracles import gauss_moments

SC = RecursionCoefficients((0.0,) * 60, (1.0,) * 60)


def test_semicircle_at_i():
    # fixed point of w = 1/(z - w) at z = i
    assert cf_convergent(SC, 60, 1j) == pytest.approx(-0.6180339887498949j, abs=1e-12)


def test_depth_one_is_reciprocal():
    rc = RecursionCoefficients((0.0,), ())
    assert cf_convergent(rc, 1, 1j) == pytest.approx(-1j)
    rc = RecursionCoefficients((2.0,), ())
    assert cf_convergent(rc, 1, 3 + 1j) == pytest.approx(1 / (1 + 1j))


def test_arity():
    with pytest.raises(ArityError):
        cf_convergent(RecursionCoefficients((0.0, 0.0), (1.0,)), 3, 1j)
    with pytest.raises(ArityError):
        cf_convergent(SC, 0, 1j)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.floats(-3, 3), st.floats(0.05, 3), st.data())
def test_convergent_equals_gauss_quadrature_transform(depth, x, y, data):
    alpha = data.draw(st.lists(st.floats(-2, 2), min_size=depth, max_size=depth))
    beta = data.draw(st.lists(st.floats(0.1, 2), min_size=depth, max_size=depth))
    rc = RecursionCoefficients(alpha, beta)
    # the depth-N convergent is the transform of the N-point Gauss measure
    off = np.sqrt(beta[:depth - 1])
    J = np.diag(alpha) + np.diag(off, 1) + np.diag(off, -1)
    nodes, vec = np.linalg.eigh(J)
    z = complex(x, y)
    ref = np.sum(vec[0] ** 2 / (z - nodes))
    assert cf_convergent(rc, depth, z) == pytest.approx(ref, rel=1e-9, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(1e-3, 5), st.floats(-2, 2), st.floats(0.1, 3))
def test_sqrt_branch_upper_half_plane(x, y, alpha, beta):
    z = complex(x, y)
    s = sqrt_branch(z, alpha, beta)
    assert s.imag > 0
    assert s * s == pytest.approx((z - alpha) ** 2 - 4 * beta, rel=1e-10, abs=1e-10)


def test_sqrt_branch_boundary_table():
    assert sqrt_branch(0.0, 0.0, 1.0) == pytest.approx(2j)
    assert sqrt_branch(3.0, 0.0, 1.0) == pytest.approx(math.sqrt(5))
    assert sqrt_branch(-3.0, 0.0, 1.0) == pytest.approx(-math.sqrt(5))
    # continuity from above
    for x in (-3.0, 0.5, 3.0):
        assert sqrt_branch(complex(x, 1e-9), 0.0, 1.0) == pytest.approx(sqrt_branch(x, 0.0, 1.0), abs=1e-6)


def test_transform_maps_upper_to_lower_half_plane():
    for mu in (Semicircle(0.3, 0.7), MarchenkoPastur(1.5, 0.5), FreeBinomial(0.3, 0.6)):
        for z in (0.1 + 0.01j, -4 + 2j, 10 + 1e-3j):
            assert mu.stieltjes(z).imag < 0


def test_inversion_semicircle():
    mu = Semicircle(0.0, 1.0)
    for x in np.linspace(-1.8, 1.8, 13):
        assert invert_density(mu.stieltjes, x) == pytest.approx(mu.density(x), abs=1e-3)


def test_inversion_from_continued_fraction():
    mu = MarchenkoPastur(2.0, 1.0)
    rc = mu.recursion_coefficients(3000)
    phi = lambda z: cf_convergent(rc, 3000, z)
    for x in (1.0, 2.5, 4.0):
        assert invert_density(phi, x, eps=(4e-2, 2e-2, 1e-2)) == pytest.approx(mu.density(x), abs=1e-3)


def test_inversion_reports_failure():
    rc = RecursionCoefficients((0.0,), ())
    # a point mass at 0: -Im Phi(iy)/pi = 1/(pi y) never settles
    with pytest.raises(InversionError):
        invert_density(lambda z: cf_convergent(rc, 1, z), 0.0)


def test_atom_mass():
    mu = FreeBinomial(0.2, 0.4)
    assert atom_mass(mu.stieltjes, 0.0) == pytest.approx(0.5, abs=1e-6)
    assert atom_mass(mu.stieltjes, 1.0) == 0.0
    assert atom_mass(MarchenkoPastur(1.0, 2.0).stieltjes, 0.0) == pytest.approx(0.5, abs=1e-6)


def test_hilbert_transform_matches_principal_value():
    mu = Semicircle(0.0, 1.0)
    for t in (-1.2, 0.3, 1.5):
        pv = integrate.quad(lambda s: float(mu.density(s)), -2, 2, weight="cauchy", wvar=t)[0]
        # quad's cauchy weight integrates f(s)/(s - t)
        assert hilbert_transform(mu, t) == pytest.approx(-pv, abs=1e-8)
    assert hilbert_transform(mu, 0.3) == pytest.approx(0.15)


def test_moments_from_transform_match_convergent():
    rc = MarchenkoPastur(1.0, 1.0).recursion_coefficients(5)
    phi = lambda z: cf_convergent(rc, 5, z)
    m = moments_from_transform(phi, 5, radius=10.0)
    np.testing.assert_allclose(m, gauss_moments(rc.alpha, rc.beta, 5), rtol=1e-6)
    np.testing.assert_allclose(m, [1, 2, 5, 14, 42], rtol=1e-6)


def test_schedule_validation():
    assert EpsilonSchedule((1e-2, 1e-3)).values == (1e-2, 1e-3)
    with pytest.raises(ValueError):
        EpsilonSchedule((1e-3, 1e-2))
    with pytest.raises(ValueError):
        EpsilonSchedule((1e-2,))
    with pytest.raises(ValueError):
        UpperHalfPlanePoint(1.0, 0.0)
    assert complex(UpperHalfPlanePoint(1.0, 2.0)) == 1 + 2j
