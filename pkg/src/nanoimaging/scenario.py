"""Physical parameters: background medium, injected particle, wavenumbers.

All lengths are relative to the diameter of the imaging region, so the
particle radius ``delta`` is a small dimensionless number.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import FieldGrid

#: Contrast ratio above which a coefficient counts as "high" when classifying.
DEFAULT_CLASS_THRESHOLD = 10.0

UNIT_BALL_VOLUME = 4.0 * math.pi / 3.0


@dataclass(frozen=True, eq=False)
class Medium:
    """Background medium, homogeneous outside a bounded region.

    ``eps0_field`` samples the permittivity over the imaging region. When it
    is ``None`` the background is homogeneous with ``eps0_exterior``.
    """

    omega: float
    mu0: float = 1.0
    eps0_exterior: float = 1.0
    eps0_field: FieldGrid | None = None

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if self.mu0 <= 0:
            raise ValueError("mu0 must be positive")
        if self.eps0_exterior <= 0:
            raise ValueError("eps0_exterior must be positive")
        if self.eps0_field is not None:
            vals = np.asarray(self.eps0_field.values)
            if np.iscomplexobj(vals) or not np.all(vals > 0):
                raise ValueError("eps0_field must be real and positive")
            edge = vals[self.eps0_field.boundary_mask()]
            if not np.allclose(edge, self.eps0_exterior, rtol=0, atol=1e-12):
                raise ValueError("eps0_field must equal eps0_exterior on the grid boundary layer")

    @property
    def homogeneous(self) -> bool:
        if self.eps0_field is None:
            return True
        return bool(np.all(self.eps0_field.values == self.eps0_exterior))

    @property
    def kappa0(self) -> float:
        """Exterior (reference) wavenumber."""
        return self.omega * math.sqrt(self.eps0_exterior * self.mu0)

    def eps0_at(self, x) -> np.ndarray:
        """Background permittivity at points ``x`` (trilinear inside the grid)."""
        x = np.asarray(x, float)
        if self.eps0_field is None:
            return np.full(x.shape[:-1], self.eps0_exterior)
        from scipy.interpolate import RegularGridInterpolator

        g = self.eps0_field
        interp = RegularGridInterpolator(g.axes(), np.asarray(g.values, float),
                                         bounds_error=False, fill_value=self.eps0_exterior)
        return interp(x.reshape(-1, 3)).reshape(x.shape[:-1])


class BodyKind(enum.Enum):
    UNIT_BALL = "unit_ball"
    TRIANGULATED = "triangulated_surface"


@dataclass(frozen=True, eq=False)
class ReferenceBody:
    """Reference shape ``B``; the particle is ``delta * B + z``."""

    kind: BodyKind
    volume: float
    mesh: object | None = None

    def __post_init__(self):
        if self.volume <= 0:
            raise ValueError("body volume must be positive")

    @classmethod
    def unit_ball(cls, mesh=None) -> "ReferenceBody":
        return cls(BodyKind.UNIT_BALL, UNIT_BALL_VOLUME, mesh)

    @classmethod
    def from_mesh(cls, mesh) -> "ReferenceBody":
        # divergence theorem with F = x / 3
        vol = float(np.sum(mesh.areas * np.einsum("ij,ij->i", mesh.centroids, mesh.normals)) / 3.0)
        return cls(BodyKind.TRIANGULATED, vol, mesh)


@dataclass(frozen=True, eq=False)
class ParticleSpec:
    delta: float
    z: np.ndarray
    eps1: float
    mu1: float
    body: ReferenceBody = field(default_factory=ReferenceBody.unit_ball)

    def __post_init__(self):
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float).reshape(3))
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.eps1 <= 0 or self.mu1 <= 0:
            raise ValueError("eps1 and mu1 must be positive")

    @property
    def volume(self) -> float:
        """Volume of the physical particle, ``delta**3 |B|``."""
        return self.delta ** 3 * self.body.volume

    def at(self, z) -> "ParticleSpec":
        return ParticleSpec(self.delta, z, self.eps1, self.mu1, self.body)


class ParticleKind(enum.Enum):
    ELECTRIC = "electric"
    MAGNETIC = "magnetic"
    MODERATE = "moderate"


@dataclass(frozen=True)
class ParticleClass:
    kind: ParticleKind
    alpha: float
    beta: float

    @property
    def in_asymptotic_regime(self) -> bool:
        """True when the asymptotic remainders are proven (``0 < alpha < 1``)."""
        return 0.0 < self.alpha < 1.0


@dataclass(frozen=True, eq=False)
class Wavenumbers:
    kappa0: float
    kappa1: float
    kappa0_field: FieldGrid | None = None


def classify_particle(spec: ParticleSpec, medium: Medium,
                      threshold: float = DEFAULT_CLASS_THRESHOLD) -> ParticleClass:
    """Electric, magnetic or moderate, with the contrast exponent ``alpha``.

    The exponent is read off ``ratio = delta**(-alpha)``.
    """
    if not 0.0 < spec.delta < 1.0:
        raise ValueError("classification needs 0 < delta < 1")
    eps_ratio = spec.eps1 / medium.eps0_exterior
    mu_ratio = spec.mu1 / medium.mu0
    big_eps = eps_ratio >= threshold
    big_mu = mu_ratio >= threshold
    if big_eps and big_mu:
        raise ValueError("both permittivity and permeability contrasts are large; "
                         "the electric and magnetic regimes are handled separately")
    log_inv_delta = math.log(1.0 / spec.delta)
    moderate_mu = 1.0 / threshold < mu_ratio < threshold
    moderate_eps = 1.0 / threshold < eps_ratio < threshold
    if big_eps and moderate_mu:
        return ParticleClass(ParticleKind.ELECTRIC, math.log(eps_ratio) / log_inv_delta, 0.0)
    if big_mu and moderate_eps:
        a = math.log(mu_ratio) / log_inv_delta
        return ParticleClass(ParticleKind.MAGNETIC, a, a)
    return ParticleClass(ParticleKind.MODERATE, 0.0, 0.0)


def wavenumbers(medium: Medium, spec: ParticleSpec) -> Wavenumbers:
    kappa1 = medium.omega * math.sqrt(spec.eps1 * spec.mu1)
    kfield = None
    if medium.eps0_field is not None:
        g = medium.eps0_field
        kfield = g.with_values(medium.omega * np.sqrt(np.asarray(g.values, float) * medium.mu0))
    return Wavenumbers(medium.kappa0, kappa1, kfield)


@dataclass(frozen=True, eq=False)
class Scenario:
    """One experiment: background, particle template and incident direction.

    ``particle.z`` is a placeholder; the injection point is swept over a grid.
    """

    medium: Medium
    particle: ParticleSpec
    d: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    class_threshold: float = DEFAULT_CLASS_THRESHOLD
    declared_class: ParticleClass | None = None  # overrides the threshold classification

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float).reshape(3)
        object.__setattr__(self, "d", d / np.linalg.norm(d))

    @property
    def particle_class(self) -> ParticleClass:
        if self.declared_class is not None:
            return self.declared_class
        return classify_particle(self.particle, self.medium, self.class_threshold)
