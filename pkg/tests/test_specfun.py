import math

import numpy as np
import pytest
import scipy.special as sps
from hypothesis import given, settings
from hypothesis import strategies as st

from nanoimaging.specfun import (legendre_all, legendre_p, spherical_bessel_j, spherical_bessel_table,
                                 spherical_bessel_y, spherical_hankel_h1)


def test_j0_vanishes_at_pi():
    assert abs(spherical_bessel_j(0, math.pi)) < 1e-14


def test_j1_small_argument():
    x = 1e-4
    assert spherical_bessel_j(1, x) == pytest.approx(x / 3, rel=1e-8)
    # next term of the series is -x^3/30
    assert spherical_bessel_j(1, x) == pytest.approx(x / 3 - x ** 3 / 30, rel=1e-12)


def test_zero_argument_limits():
    assert spherical_bessel_j(0, 0.0) == 1.0
    assert spherical_bessel_j(3, 0.0) == 0.0


def test_negative_argument_parity():
    assert spherical_bessel_j(3, -1.7) == pytest.approx(-spherical_bessel_j(3, 1.7), rel=1e-14)


def test_wronskian_single_point():
    tab = spherical_bessel_table(5, 2.7)
    j, dj = tab.values_j[5], tab.derivatives_j[5]
    y, dy = tab.values_y[5], tab.derivatives_y[5]
    assert j * dy - dj * y == pytest.approx(1 / 2.7 ** 2, rel=1e-12)


@pytest.mark.parametrize("x", [1e-3, 0.01, 0.37, 1.0, 4.2, 17.0, 55.5, 100.0])
def test_wronskian_range(x):
    tab = spherical_bessel_table(100, x)
    assert np.max(tab.wronskian_residual()) < 1e-10


@pytest.mark.parametrize("x", [0.05, 0.9, 3.3, 12.0, 48.0, 99.0])
def test_against_scipy(x):
    n = np.arange(0, 60)
    ours = np.array([spherical_bessel_j(k, x) for k in n])
    ref = sps.spherical_jn(n, x)
    big = np.abs(ref) > 1e-250
    assert np.allclose(ours[big], ref[big], rtol=1e-12, atol=1e-14 * np.max(np.abs(ref)))
    tab = spherical_bessel_table(30, x)
    assert np.allclose(tab.values_y, sps.spherical_yn(np.arange(31), x), rtol=1e-12)
    assert np.allclose(tab.derivatives_j, sps.spherical_jn(np.arange(31), x, derivative=True),
                       rtol=1e-10, atol=1e-15)


def test_hankel_order_zero():
    assert abs(spherical_hankel_h1(0, 1.0)) == pytest.approx(1.0, rel=1e-14)
    assert spherical_hankel_h1(0, math.pi) == pytest.approx(1j / math.pi, abs=1e-15)


def test_hankel_large_argument():
    # the one-term form is off by n(n+1)/(2x) = 0.012 here; the two-term form is close
    x, n = 500.0, 3
    lead = (-1j) ** (n + 1) * np.exp(1j * x) / x
    h = spherical_hankel_h1(n, x)
    assert abs(h - lead) / abs(lead) == pytest.approx(n * (n + 1) / (2 * x), rel=1e-2)
    two_term = lead * (1 + 1j * n * (n + 1) / (2 * x))
    assert abs(h - two_term) / abs(lead) < 1e-4
    for m in range(3):
        lead = (-1j) ** (m + 1) * np.exp(1j * x) / x
        assert abs(spherical_hankel_h1(m, x) - lead) / abs(lead) < 1e-2


def test_hankel_domain():
    with pytest.raises(ValueError):
        spherical_hankel_h1(0, 0.0)
    with pytest.raises(ValueError):
        spherical_hankel_h1(2, -1.0)
    with pytest.raises(ValueError):
        spherical_bessel_y(1, 0.0)


def test_legendre_values():
    assert all(legendre_p(n, 1.0) == pytest.approx(1.0) for n in range(20))
    assert legendre_p(2, 0.0) == -0.5


def test_legendre_explicit_polynomials():
    t = np.linspace(-1, 1, 100)
    explicit = [np.ones_like(t), t, (3 * t ** 2 - 1) / 2, (5 * t ** 3 - 3 * t) / 2,
                (35 * t ** 4 - 30 * t ** 2 + 3) / 8]
    P = legendre_all(4, t)
    for n in range(5):
        assert np.max(np.abs(P[n] - explicit[n])) < 1e-14


def test_legendre_orthogonality():
    t, w = np.polynomial.legendre.leggauss(20)
    assert abs(np.sum(w * legendre_p(3, t) * legendre_p(4, t))) < 1e-14
    assert np.sum(w * legendre_p(4, t) ** 2) == pytest.approx(2 / 9, rel=1e-13)


def test_legendre_domain():
    with pytest.raises(ValueError):
        legendre_p(2, 1.5)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100), st.floats(1e-3, 100.0))
def test_wronskian_property(n, x):
    tab = spherical_bessel_table(n, x)
    assert tab.wronskian_residual()[n] < 1e-10
