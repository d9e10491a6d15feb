import math

import numpy as np
import pytest

from nanoimaging.mie import (farfield_constant, mie_far_field, mie_interior_field, mie_monopole_limit,
                             mie_near_field, solve_mie)
from nanoimaging.rates import fit_rate
from nanoimaging.scenario import Medium, ParticleSpec

rng = np.random.default_rng(11)


def unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


@pytest.fixture
def ball():
    medium = Medium(omega=2.0, mu0=1.0, eps0_exterior=1.0)
    spec = ParticleSpec(0.5, [0.1, -0.2, 0.05], eps1=3.0, mu1=1.5)
    return medium, spec, solve_mie(spec, medium)


def test_zero_contrast():
    medium = Medium(omega=1.3)
    c = solve_mie(ParticleSpec(0.2, np.zeros(3), 1.0, 1.0), medium)
    assert np.all(c.scat == 0)
    assert abs(mie_far_field(c, [1.0, 0, 0], [0, 0, 1.0])) < 1e-12
    assert abs(mie_near_field(c, [0.5, 0.1, 0.0], [0, 0, 1.0])) < 1e-12


def test_mode_residual(ball):
    _, _, c = ball
    assert np.max(c.residual) < 1e-12


def test_monopole_dominates_small_ball():
    c = solve_mie(ParticleSpec(1e-2, np.zeros(3), 100.0, 1.0), Medium(omega=1.0))
    assert abs(c.scat[0] / c.scat[1]) > 1e3


def test_reciprocity(ball):
    _, _, c = ball
    for _ in range(20):
        xh, d = unit(rng.standard_normal(3)), unit(rng.standard_normal(3))
        a, b = mie_far_field(c, xh, d), mie_far_field(c, -d, -xh)
        assert abs(a - b) <= 1e-10 * abs(a)


@pytest.mark.parametrize("params", [(2.0, 0.5, 3.0, 1.5), (1.0, 0.05, 40.0, 1.0), (3.0, 0.3, 1.0, 8.0)])
def test_optical_theorem(params):
    omega, delta, eps1, mu1 = params
    medium = Medium(omega=omega)
    c = solve_mie(ParticleSpec(delta, np.zeros(3), eps1, mu1), medium)
    d = np.array([0.0, 0.0, 1.0])
    t, w = np.polynomial.legendre.leggauss(200)
    xh = np.stack([np.sqrt(1 - t ** 2), np.zeros_like(t), t], axis=-1)
    total = 2 * math.pi * np.sum(w * np.abs(mie_far_field(c, xh, d)) ** 2)
    lhs = medium.kappa0 / (4 * math.pi) * total
    rhs = mie_far_field(c, d, d).imag
    assert abs(lhs - rhs) <= 1e-8 * abs(rhs)


def test_far_ring(ball):
    _, _, c = ball
    d = np.array([0.0, 0.0, 1.0])
    xh = unit(np.array([0.3, -0.5, 0.2]))
    R = 1e3
    us = mie_near_field(c, R * xh, d)
    approx = us * R * np.exp(-1j * c.kappa0 * R)
    ff = mie_far_field(c, xh, d)
    assert abs(approx - ff) < 1e-2 * abs(ff)


def test_boundary_continuity(ball):
    medium, spec, c = ball
    d = unit(np.array([0.2, 0.1, 1.0]))
    for _ in range(5):
        e = unit(rng.standard_normal(3))
        outside = mie_near_field(c, spec.z + spec.delta * (1 + 1e-14) * e, d, total=True)
        inside = mie_interior_field(c, spec.z + spec.delta * e, d)
        assert abs(outside - inside) <= 1e-10 * abs(inside)


def test_near_field_domain(ball):
    _, spec, c = ball
    with pytest.raises(ValueError):
        mie_near_field(c, spec.z + 0.1, [0, 0, 1.0])


def test_truncation_convergence(ball):
    medium, spec, c = ball
    d = np.array([0.0, 0.0, 1.0])
    c2 = solve_mie(spec, medium, n_max=2 * c.n_max)
    xh = unit(np.array([0.4, 0.3, -0.2]))
    a, b = mie_far_field(c, xh, d), mie_far_field(c2, xh, d)
    assert abs(a - b) < 1e-12 * abs(a)


def test_requires_homogeneous_ball():
    from nanoimaging.background import gaussian_bump

    medium = Medium(omega=1.0, eps0_field=gaussian_bump(8, 0.1, 0.1, 0.1))
    with pytest.raises(ValueError):
        solve_mie(ParticleSpec(0.01, np.zeros(3), 2.0, 1.0), medium)


def test_farfield_constant():
    assert farfield_constant() == pytest.approx(1 / (4 * math.pi), rel=1e-15)


def test_monopole_limit_value():
    medium = Medium(omega=1.0)
    lim = mie_monopole_limit(ParticleSpec(1e-3, np.zeros(3), 2.0, 1.0), medium)
    assert lim.real == pytest.approx(1 / 3, rel=1e-6)  # c_ff * 4 pi / 3
    assert abs(lim.imag) < 1e-6


def test_monopole_limit_zero_contrast():
    assert mie_monopole_limit(ParticleSpec(1e-3, np.zeros(3), 1.0, 1.0), Medium(omega=1.0)) == 0


def test_monopole_limit_direction_independent():
    medium = Medium(omega=1.0)
    spec = ParticleSpec(1e-3, np.zeros(3), 5.0, 1.0)
    vals = [mie_monopole_limit(spec, medium, d=unit(rng.standard_normal(3))) for _ in range(5)]
    assert np.ptp(np.real(vals)) < 1e-10 and np.ptp(np.imag(vals)) < 1e-10


def test_monopole_limit_needs_equal_mu():
    with pytest.raises(ValueError):
        mie_monopole_limit(ParticleSpec(1e-3, np.zeros(3), 2.0, 3.0), Medium(omega=1.0))


def _backscatter_sweep(alpha):
    medium = Medium(omega=1.0)
    d = np.array([0.0, 0.0, 1.0])
    pts, lead = [], []
    for delta in 0.1 * 2.0 ** -np.arange(6):
        eps1 = delta ** -alpha
        c = solve_mie(ParticleSpec(delta, np.zeros(3), eps1, 1.0), medium)
        pts.append((delta, abs(mie_far_field(c, -d, d))))
        lead.append((delta, (eps1 - 1.0) * delta ** 3 / 3.0))
    return fit_rate(pts).slope, fit_rate(lead).slope


def test_small_delta_scaling():
    slope, _ = _backscatter_sweep(0.5)
    assert slope == pytest.approx(2.5, abs=0.1)


@pytest.mark.parametrize("alpha", [1 / 3, 1 / 2])
def test_small_delta_scaling_follows_contrast(alpha):
    # eps1 - eps0 = delta^-alpha - 1 is not a pure power on this ladder, so
    # the slope tracks (eps1 - eps0) delta^3 rather than delta^(3 - alpha)
    slope, expected = _backscatter_sweep(alpha)
    assert slope == pytest.approx(expected, abs=0.02)
