"""Log-log rate fits and the convergence sweeps built on them."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .asymptotics import farfield_perturbation
from .mie import mie_far_field, solve_mie
from .scenario import Medium, ParticleClass, ParticleKind, ParticleSpec

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RateFit:
    points: list[tuple[float, float]]
    slope: float
    intercept: float
    r_squared: float

    def __str__(self):
        return f"slope {self.slope:.4f} (intercept {self.intercept:.4f}, r^2 {self.r_squared:.5f})"


def fit_rate(points) -> RateFit:
    """Least-squares line through ``(log h, log err)``.

    Points with non-positive error are dropped with a warning; at least three
    must remain.
    """
    pts = [(float(h), float(e)) for h, e in points]
    kept = [(h, e) for h, e in pts if e > 0 and h > 0]
    if len(kept) < len(pts):
        log.warning("fit_rate: dropped %d non-positive points", len(pts) - len(kept))
    if len(kept) < 3:
        raise ValueError("a rate fit needs at least three positive points")
    x = np.log([h for h, _ in kept])
    y = np.log([e for _, e in kept])
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(kept, float(slope), float(intercept), float(min(max(r2, 0.0), 1.0)))


def delta_ladder(start: float = 0.1, count: int = 6) -> np.ndarray:
    return start * 2.0 ** -np.arange(count)


def electric_farfield_errors(alpha: float, deltas, omega: float = 1.0, d=(0.0, 0.0, 1.0),
                             z=(0.0, 0.0, 0.0), offset=(0.0, 0.0, 0.0)):
    """``|Mie perturbation - leading term|`` at backscatter for ``eps1 = eps0 delta^-alpha``.

    Vacuum background, ``mu1 = mu0``. ``offset`` moves the ball centre to
    ``z + delta * offset`` while the formula keeps ``z``. Rows are
    ``(delta, error, exact, leading)``.
    """
    medium = Medium(omega=omega)
    d = np.asarray(d, float) / np.linalg.norm(d)
    z = np.asarray(z, float)
    cls = ParticleClass(ParticleKind.ELECTRIC, alpha, 0.0)
    U = np.exp(1j * medium.kappa0 * (z @ d))
    gU = 1j * medium.kappa0 * U * d
    rows = []
    for delta in deltas:
        eps1 = medium.eps0_exterior * delta ** (-alpha)
        spec = ParticleSpec(delta, z, eps1, medium.mu0)
        ball = spec.at(z + delta * np.asarray(offset, float))
        exact = complex(mie_far_field(solve_mie(ball, medium), -d, d))
        lead = farfield_perturbation(cls, U, U, gU, gU, np.zeros((3, 3)), spec, medium, medium.eps0_exterior)
        rows.append((float(delta), abs(exact - lead), exact, lead))
    return rows


def sweep_rate(rows) -> RateFit:
    """Rate fit of the ``(delta, error)`` columns of a sweep table."""
    return fit_rate([(r[0], r[1]) for r in rows])
