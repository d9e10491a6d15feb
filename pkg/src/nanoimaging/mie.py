"""Exact series solution for a penetrable ball in a homogeneous medium.

The incident plane wave ``exp(i k0 x.d)`` is expanded about the ball centre
as ``sum_n i^n (2n+1) j_n(k0 r) P_n(cos t)``; each order then decouples into
a 2x2 system expressing continuity of the field and of ``(1/mu) d/dr`` at the
surface. Used as the reference against which the small-particle formulas are
checked.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .scenario import BodyKind, Medium, ParticleSpec
from .specfun import legendre_all, spherical_bessel_table

#: Candidates for the far-field normalisation; settled by ``farfield_constant``.
FARFIELD_CANDIDATES = (1.0, 1.0 / (4.0 * math.pi))


class MieError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class MieCoefficients:
    n_max: int
    scat: np.ndarray
    int: np.ndarray
    radius: float
    kappa0: float
    kappa1: float
    mu0: float
    mu1: float
    center: np.ndarray
    residual: np.ndarray  # per-order max relative residual of the 2x2 system


def _nmax_rule(x: float) -> int:
    return int(math.ceil(x + 4.0 * x ** (1.0 / 3.0) + 10.0))


def _mode_coefficients(n_max, x0, x1, t, s):
    """Exterior and interior coefficients ``b_n, a_n`` (without the ``i^n(2n+1)`` factor)."""
    ext = spherical_bessel_table(n_max, x0)
    inn = ext if x1 == x0 else spherical_bessel_table(n_max, x1)
    j0, dj0 = ext.values_j, ext.derivatives_j
    h0, dh0 = ext.values_h, ext.derivatives_h
    J1, dJ1 = inn.values_j, inn.derivatives_j
    num = t * dj0 * J1 - s * j0 * dJ1
    den = t * dh0 * J1 - s * h0 * dJ1
    if np.any(den == 0):
        raise MieError("singular mode system")
    b = -num / den
    # interior amplitude from whichever matching condition is better conditioned
    use_value = np.abs(J1) * abs(s) >= np.abs(s * dJ1)
    with np.errstate(divide="ignore", invalid="ignore"):
        a_val = (j0 + b * h0) / J1
        a_der = t * (dj0 + b * dh0) / (s * dJ1)
    a = np.where(use_value, a_val, a_der)
    r1 = np.abs(j0 + b * h0 - a * J1) / (np.abs(j0) + np.abs(b * h0) + np.abs(a * J1))
    r2 = np.abs(t * (dj0 + b * dh0) - s * a * dJ1) / (
        np.abs(t * dj0) + np.abs(t * b * dh0) + np.abs(s * a * dJ1))
    return b, a, np.maximum(r1, r2)


def solve_mie(spec: ParticleSpec, medium: Medium, incident_direction=None,
              n_max: int | None = None) -> MieCoefficients:
    """Mode coefficients for a ball of radius ``spec.delta`` centred at ``spec.z``.

    Coefficients are referred to the ball centre with unit incident
    amplitude there; the translation phase is applied at evaluation, so the
    same object serves every incident direction (the argument is accepted
    for symmetry with the other solvers). A given ``n_max`` is used as is.
    """
    if not medium.homogeneous:
        raise ValueError("the series solution needs a homogeneous background")
    if spec.body.kind is not BodyKind.UNIT_BALL:
        raise ValueError("the series solution is only available for a ball")
    k0 = medium.kappa0
    k1 = medium.omega * math.sqrt(spec.eps1 * spec.mu1)
    x0, x1 = k0 * spec.delta, k1 * spec.delta
    t, s = k0 / medium.mu0, k1 / spec.mu1
    if k1 == k0 and spec.mu1 == medium.mu0:
        n = np.arange((n_max or _nmax_rule(x0)) + 1)
        expansion = (1j ** n) * (2 * n + 1)
        return MieCoefficients(len(n) - 1, np.zeros(len(n), complex), expansion.astype(complex),
                               spec.delta, k0, k1, medium.mu0, spec.mu1, spec.z.copy(), np.zeros(len(n)))
    if n_max is not None:
        b, a, res = _mode_coefficients(n_max, x0, x1, t, s)
        n = np.arange(n_max + 1)
        expansion = (1j ** n) * (2 * n + 1)
        return MieCoefficients(n_max, expansion * b, expansion * a, spec.delta, k0, k1, medium.mu0,
                               spec.mu1, spec.z.copy(), res)
    n_max = _nmax_rule(x0)
    while True:
        b, a, res = _mode_coefficients(n_max, x0, x1, t, s)
        n = np.arange(n_max + 1)
        expansion = (1j ** n) * (2 * n + 1)
        c = expansion * b
        total = np.sum(np.abs(c))
        if total == 0.0 or abs(c[-1]) < 1e-14 * total or n_max > 4096:
            break
        n_max *= 2
    return MieCoefficients(n_max, c, expansion * a, spec.delta, k0, k1, medium.mu0, spec.mu1,
                           spec.z.copy(), res)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def mie_far_field(coeffs: MieCoefficients, xhat, d) -> np.ndarray:
    """Far-field pattern, the coefficient of ``exp(i k0 |x|)/|x|``."""
    xhat, d = _unit(xhat), _unit(d)
    cos = np.clip(np.sum(xhat * d, axis=-1), -1.0, 1.0)
    n = np.arange(coeffs.n_max + 1)
    P = legendre_all(coeffs.n_max, cos)
    series = np.tensordot((-1j) ** (n + 1) * coeffs.scat, P, axes=(0, 0)) / coeffs.kappa0
    phase = np.exp(1j * coeffs.kappa0 * np.sum((d - xhat) * coeffs.center, axis=-1))
    return phase * series


def _radial_series(coeffs_n, n_max, kr, cos, kind):
    out = np.empty(kr.shape, dtype=complex)
    for idx in np.ndindex(kr.shape):
        tab = spherical_bessel_table(n_max, kr[idx])
        radial = tab.values_h if kind == "h" else tab.values_j
        out[idx] = np.sum(coeffs_n * radial * legendre_all(n_max, cos[idx]))
    return out


def mie_near_field(coeffs: MieCoefficients, x, d, total: bool = False) -> np.ndarray:
    """Scattered (or total) field at points outside the ball."""
    x = np.asarray(x, dtype=float)
    d = _unit(d)
    rel = x - coeffs.center
    r = np.linalg.norm(rel, axis=-1)
    if np.any(r <= coeffs.radius):
        raise ValueError("evaluation point inside the scatterer")
    cos = np.clip(np.sum(rel * d, axis=-1) / r, -1.0, 1.0)
    phase = np.exp(1j * coeffs.kappa0 * np.dot(coeffs.center, d))
    us = phase * _radial_series(coeffs.scat, coeffs.n_max, coeffs.kappa0 * np.atleast_1d(r),
                                np.atleast_1d(cos), "h").reshape(r.shape)
    if total:
        us = us + np.exp(1j * coeffs.kappa0 * np.sum(x * d, axis=-1))
    return us


def mie_interior_field(coeffs: MieCoefficients, x, d) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    d = _unit(d)
    rel = x - coeffs.center
    r = np.linalg.norm(rel, axis=-1)
    if np.any(r > coeffs.radius * (1 + 1e-12)):
        raise ValueError("evaluation point outside the scatterer")
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(r > 0, np.sum(rel * d, axis=-1) / np.where(r > 0, r, 1.0), 1.0)
    kr = np.maximum(coeffs.kappa1 * np.atleast_1d(r), 1e-300)
    phase = np.exp(1j * coeffs.kappa0 * np.dot(coeffs.center, d))
    return phase * _radial_series(coeffs.int, coeffs.n_max, kr, np.atleast_1d(cos), "j").reshape(r.shape)


def mie_monopole_limit(spec: ParticleSpec, medium: Medium, xhat=None, d=(0.0, 0.0, 1.0)) -> complex:
    """``lim_{delta -> 0} u_inf(xhat, d) / delta^3`` for a permittivity-only contrast.

    Extrapolated from two small radii; the error of ``u_inf/delta^3`` is even
    in ``delta`` to leading order, so one Richardson step in ``delta^2`` is used.
    """
    if spec.mu1 != medium.mu0:
        raise ValueError("monopole limit requires mu1 == mu0")
    d = _unit(d)
    xhat = -d if xhat is None else _unit(xhat)
    k1 = medium.omega * math.sqrt(spec.eps1 * spec.mu1)
    r1 = 1e-3 / max(medium.kappa0, k1, 1.0)

    def ratio(r):
        c = solve_mie(ParticleSpec(r, spec.z, spec.eps1, spec.mu1, spec.body), medium)
        return mie_far_field(c, xhat, d) / r ** 3

    f1, f2 = ratio(r1), ratio(r1 / 2)
    return complex((4.0 * f2 - f1) / 3.0)


@functools.lru_cache(maxsize=None)
def farfield_constant() -> float:
    """Constant relating the volume-integral far field to the pattern convention.

    Obtained from the small-ball limit with ``eps1 - eps0 = 1``,
    ``omega = mu0 = 1``, ``z = 0`` and ``xhat = -d``, where the leading
    asymptotic term equals the constant times ``|B| = 4 pi / 3``.
    """
    from .scenario import ReferenceBody

    medium = Medium(omega=1.0, mu0=1.0, eps0_exterior=1.0)
    spec = ParticleSpec(1e-3, np.zeros(3), 2.0, 1.0, ReferenceBody.unit_ball())
    measured = mie_monopole_limit(spec, medium).real / spec.body.volume
    for cand in FARFIELD_CANDIDATES:
        if abs(measured - cand) < 1e-6 * cand:
            return cand
    raise MieError(f"far-field normalisation {measured} matches no candidate")
