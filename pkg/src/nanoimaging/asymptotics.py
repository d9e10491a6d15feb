"""Small-particle expansions of the perturbed fields and synthetic data.

For a particle ``D = delta B + z`` the far-field and near-field
perturbations are, to leading order, a monopole proportional to the
permittivity contrast plus a dipole governed by the polarization tensor

    V_inf - U_inf ~ c_ff [w^2 mu0 (eps1 - eps0(z)) U(z, d) U(z, -xhat) delta^3 |B|
                          - delta^3 <grad U(z, -xhat), M grad U(z, d)>]

    V_s(x) - U_s(x) ~ G(x, z) w^2 mu0 (eps1 - eps0(z)) U(z, d) delta^3 |B|
                      - delta^3 <grad_z G(x, z), M grad U(z, d)>

The electric and magnetic cases share these terms and differ only in the
size of the remainder.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import background as bg
from .grid import FieldGrid
from .mie import farfield_constant, mie_far_field, mie_near_field, solve_mie
from .scenario import BodyKind, Medium, ParticleClass, ParticleKind, ParticleSpec, Scenario
from .surface_potentials import M0_HIGH_CONTRAST, ball_polarization_tensor, polarization_tensor

NEAR_MIN_DISTANCE = 10.0  # in units of delta


class ValidityError(ValueError):
    pass


class UnsupportedModeError(ValueError):
    pass


class SynthesisMode(enum.Enum):
    ASYMPTOTIC_LEADING = "AsymptoticLeading"
    ASYMPTOTIC_WITH_REMAINDER = "AsymptoticWithRemainder"
    MIE_EXACT = "MieExact"


@dataclass(frozen=True)
class RemainderOrder:
    """``delta^power * |log delta|^log_power * dist^dist_power``; one term of a remainder bound."""

    power: float
    log_power: int = 0
    dist_power: int = 0

    def __call__(self, delta, dist=1.0):
        return delta ** self.power * abs(math.log(delta)) ** self.log_power * dist ** self.dist_power

    def __str__(self):
        s = f"delta^{self.power:g}"
        if self.log_power:
            s += "|log delta|"
        if self.dist_power:
            s += f" d^{self.dist_power}"
        return s


def farfield_remainder(cls: ParticleClass) -> tuple[RemainderOrder, ...]:
    if cls.kind is ParticleKind.MAGNETIC:
        return (RemainderOrder(4.0, 1),)
    return (RemainderOrder(4.0 - cls.alpha),)


def nearfield_remainder(cls: ParticleClass) -> tuple[RemainderOrder, ...]:
    if cls.kind is ParticleKind.MAGNETIC:
        return RemainderOrder(4.0 + cls.alpha, 1, -2), RemainderOrder(4.0, 0, -3)
    return RemainderOrder(4.0 - cls.alpha, 0, -2), RemainderOrder(4.0, 0, -3)


def _check_validity(cls: ParticleClass):
    if not cls.in_asymptotic_regime:
        warnings.warn(f"alpha = {cls.alpha:.3g} lies outside (0, 1); the expansion is not justified there",
                      stacklevel=3)


def farfield_perturbation(cls: ParticleClass, U_d, U_mx, gradU_d, gradU_mx, M, spec: ParticleSpec,
                          medium: Medium, eps0_z: float | None = None) -> complex:
    """Leading monopole plus dipole far-field perturbation ``V_inf - U_inf``.

    ``U_mx`` and ``gradU_mx`` are the background field for incidence
    ``-xhat``. ``eps0_z`` defaults to the background permittivity at ``spec.z``.
    """
    _check_validity(cls)
    if eps0_z is None:
        eps0_z = float(medium.eps0_at(spec.z))
    mono = medium.omega ** 2 * medium.mu0 * (spec.eps1 - eps0_z) * U_d * U_mx * spec.volume
    dip = spec.delta ** 3 * np.dot(np.asarray(gradU_mx), np.asarray(M) @ np.asarray(gradU_d))
    return complex(farfield_constant() * (mono - dip))


def nearfield_perturbation(cls: ParticleClass, G, gradG, U, gradU, M, spec: ParticleSpec,
                           medium: Medium, dist: float, eps0_z: float | None = None) -> complex:
    """Leading near-field perturbation ``V_s(x) - U_s(x)`` at distance ``dist`` from ``z``.

    ``gradG`` is the gradient of ``G(x, z)`` with respect to the source ``z``.
    """
    if dist < NEAR_MIN_DISTANCE * spec.delta:
        raise ValidityError(f"measurement point at distance {dist:.3g} is closer than "
                            f"{NEAR_MIN_DISTANCE:g} delta = {NEAR_MIN_DISTANCE * spec.delta:.3g}")
    _check_validity(cls)
    if eps0_z is None:
        eps0_z = float(medium.eps0_at(spec.z))
    mono = G * medium.omega ** 2 * medium.mu0 * (spec.eps1 - eps0_z) * U * spec.volume
    dip = spec.delta ** 3 * np.dot(np.asarray(gradG), np.asarray(M) @ np.asarray(gradU))
    return complex(mono - dip)


def near_zone_leading(U, gradU, e, dist, m0: float, spec: ParticleSpec, medium: Medium,
                      eps0_z: float) -> complex:
    """Static near-zone form of the leading term with ``M = m0 |B| Id``.

    Uses ``G ~ 1/(4 pi d)`` and ``grad_z G ~ e / (4 pi d^2)``, ``e`` the unit
    vector from ``z`` to ``x``; this is the form the gradient inversion reads.
    """
    B = spec.body.volume
    dip = -m0 * B * np.dot(e, gradU) / (4.0 * math.pi)
    mono = medium.omega ** 2 * medium.mu0 * (spec.eps1 - eps0_z) * U * B * dist / (4.0 * math.pi)
    return complex((dip + mono) * spec.delta ** 3 / dist ** 2)


def particle_tensor(spec: ParticleSpec, mu0: float) -> np.ndarray:
    """Polarization tensor of the reference body at the particle's permeability."""
    if spec.mu1 == mu0:
        return np.zeros((3, 3))
    if spec.body.kind is BodyKind.UNIT_BALL:
        return ball_polarization_tensor(mu0, spec.mu1, spec.body.volume).matrix
    return polarization_tensor(spec.body.mesh, mu0, spec.mu1, spec.body.volume).matrix


# -- samples and datasets ---------------------------------------------------------

@dataclass(frozen=True)
class FarFieldSample:
    xhat: np.ndarray
    d: np.ndarray
    z: np.ndarray
    value_before: complex
    value_after: complex


@dataclass(frozen=True)
class NearFieldSample:
    x: np.ndarray
    z: np.ndarray
    d: np.ndarray
    value_before: complex
    value_after: complex

    @property
    def dist(self) -> float:
        return float(np.linalg.norm(self.x - self.z))


@dataclass(frozen=True)
class MeasurementPlan:
    """Backscatter far field plus, optionally, near points around every ``z``.

    Near points sit at ``z + f c delta^alpha e_j`` for each direction ``e_j``
    and each radius factor ``f``.
    """

    near_directions: np.ndarray | None = None
    radius_c: float = 1.0
    radius_factors: tuple[float, ...] = (1.0, 2.0)

    @classmethod
    def axis_aligned(cls, radius_c: float = 1.0, radius_factors=(1.0, 2.0)) -> "MeasurementPlan":
        return cls(np.eye(3), radius_c, tuple(radius_factors))

    def near_radius(self, delta: float, alpha: float) -> float:
        return self.radius_c * delta ** alpha


def _cplx(v) -> list[float]:
    return [float(np.real(v)), float(np.imag(v))]


def _uncplx(p) -> complex:
    return complex(p[0], p[1])


@dataclass(eq=False)
class SyntheticDataset:
    mode: SynthesisMode
    noise_level: float
    seed: int | None
    z_grid: FieldGrid
    far: list[FarFieldSample]
    near: list[NearFieldSample] = field(default_factory=list)
    scenario_echo: dict = field(default_factory=dict)

    def backscatter_difference(self) -> np.ndarray:
        """``V_inf - U_inf`` at ``xhat = -d`` arranged on the z-grid."""
        out = np.empty(self.z_grid.dims, complex)
        for s in self.far:
            out[self.z_grid.index_of(s.z)] = s.value_after - s.value_before
        return out

    def near_for(self, z) -> list[NearFieldSample]:
        z = np.asarray(z, float)
        return [s for s in self.near if np.allclose(s.z, z, rtol=0, atol=1e-12)]

    def to_json(self) -> dict:
        g = self.z_grid
        return {
            "mode": self.mode.value,
            "noise_level": self.noise_level,
            "seed": self.seed,
            "scenario": self.scenario_echo,
            "z_grid": {"origin": g.origin.tolist(), "spacing": g.spacing, "dims": list(g.dims)},
            "far": [{"xhat": s.xhat.tolist(), "d": s.d.tolist(), "z": s.z.tolist(),
                     "before": _cplx(s.value_before), "after": _cplx(s.value_after)} for s in self.far],
            "near": [{"x": s.x.tolist(), "z": s.z.tolist(), "d": s.d.tolist(),
                      "before": _cplx(s.value_before), "after": _cplx(s.value_after)} for s in self.near],
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def from_json(cls, doc: dict) -> "SyntheticDataset":
        gz = doc["z_grid"]
        grid = FieldGrid(gz["origin"], gz["spacing"], gz["dims"], np.zeros(gz["dims"]))
        far = [FarFieldSample(np.array(s["xhat"]), np.array(s["d"]), np.array(s["z"]),
                              _uncplx(s["before"]), _uncplx(s["after"])) for s in doc["far"]]
        near = [NearFieldSample(np.array(s["x"]), np.array(s["z"]), np.array(s["d"]),
                                _uncplx(s["before"]), _uncplx(s["after"])) for s in doc.get("near", [])]
        return cls(SynthesisMode(doc["mode"]), doc["noise_level"], doc["seed"], grid, far, near,
                   doc.get("scenario", {}))

    @classmethod
    def load(cls, path: str | Path) -> "SyntheticDataset":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


# -- synthesis -------------------------------------------------------------------

class _Background:
    """Background field values needed by the generators, for one incident direction."""

    def __init__(self, medium: Medium, d, z_grid: FieldGrid):
        self.medium = medium
        self.d = np.asarray(d, float)
        self.variable = not medium.homogeneous
        self.z_grid = z_grid
        if self.variable:
            self.U = bg.ls_solve(medium, self.d)
        self._greens: dict = {}

    def total(self, pts) -> np.ndarray:
        pts = np.asarray(pts, float)
        if not self.variable:
            return bg.plane_wave(self.medium.kappa0, self.d, pts)
        if self.U.same_geometry(self.z_grid) and pts.shape == self.z_grid.points().shape:
            return self.U.values
        return bg.field_at(self.medium, self.U, self.d, pts)

    def gradient(self, pts) -> np.ndarray:
        pts = np.asarray(pts, float)
        if not self.variable:
            return 1j * self.medium.kappa0 * bg.plane_wave(self.medium.kappa0, self.d, pts)[..., None] * self.d
        return bg.ls_gradient(self.medium, self.U, self.d, pts)

    def scattered(self, x) -> complex:
        if not self.variable:
            return 0j
        inc = bg.plane_wave(self.medium.kappa0, self.d, x)
        return complex(bg.field_at(self.medium, self.U, self.d, x) - inc)

    def farfield(self, xhat) -> complex:
        if not self.variable:
            return 0j
        return complex(bg.background_farfield(self.medium, self.U, xhat))

    def greens(self, x, z):
        """``G(x, z)`` and its gradient in ``z``."""
        x, z = np.asarray(x, float), np.asarray(z, float)
        if not self.variable:
            r = np.linalg.norm(x - z)
            return complex(bg.phi(self.medium.kappa0, r)), bg.grad_phi(self.medium.kappa0, z, x)
        # gradient in the source by symmetry: differentiate G(., x) at z
        key = tuple(np.round(x, 14))
        if key not in self._greens:
            self._greens[key] = bg.GreensFunction(self.medium, x)
        ev = self._greens[key](z[None])
        return complex(ev.values[0]), ev.gradients[0]


def synthesize(scenario: Scenario, z_grid: FieldGrid, plan: MeasurementPlan | None = None,
               mode: SynthesisMode | str = SynthesisMode.ASYMPTOTIC_LEADING,
               noise: float = 0.0, seed: int | None = 0) -> SyntheticDataset:
    """Before/after measurements for a particle injected at every node of ``z_grid``.

    Modes:

    * ``AsymptoticLeading``: exactly the leading terms read by the inversion
      formulas (for magnetic particles with ``M = m0 |B| Id``, ``m0 = -3/2``,
      and near data in static near-zone form).
    * ``AsymptoticWithRemainder``: leading terms with the full Green's function
      and the polarization tensor at the actual ``mu1``, plus remainder terms
      of the theoretical orders with unit constants.
    * ``MieExact``: the series solution (homogeneous background, ball only).
    """
    mode = SynthesisMode(mode)
    plan = plan or MeasurementPlan()
    medium, tmpl, d = scenario.medium, scenario.particle, scenario.d
    cls = scenario.particle_class
    if mode is SynthesisMode.MIE_EXACT:
        if not medium.homogeneous:
            raise UnsupportedModeError("MieExact data needs a homogeneous background")
        if tmpl.body.kind is not BodyKind.UNIT_BALL:
            raise UnsupportedModeError("MieExact data needs a ball-shaped particle")
    if noise < 0:
        raise ValueError("noise level must be non-negative")
    if not cls.in_asymptotic_regime:
        warnings.warn(f"alpha = {cls.alpha:.3g} is outside (0, 1); data generated anyway", stacklevel=2)

    delta = tmpl.delta
    back = _Background(medium, d, z_grid)
    zs = z_grid.points()
    Uz = back.total(zs)
    needs_gradient = cls.kind is ParticleKind.MAGNETIC or tmpl.mu1 != medium.mu0 \
        or plan.near_directions is not None
    gUz = back.gradient(zs) if needs_gradient else np.zeros(zs.shape, complex)
    eps0_z = medium.eps0_at(zs)
    magnetic = cls.kind is ParticleKind.MAGNETIC
    if mode is SynthesisMode.ASYMPTOTIC_LEADING and magnetic:
        M = M0_HIGH_CONTRAST * tmpl.body.volume * np.eye(3)
    else:
        M = particle_tensor(tmpl, medium.mu0)
    xhat = -d
    c_ff = farfield_constant()
    before = back.farfield(xhat)  # the background far field does not depend on z

    far, near = [], []
    radius = plan.near_radius(delta, cls.alpha) if plan.near_directions is not None else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for idx in np.ndindex(z_grid.dims):
            z = zs[idx]
            spec = tmpl.at(z)
            U, gU, e0 = Uz[idx], gUz[idx], float(eps0_z[idx])
            if mode is SynthesisMode.MIE_EXACT:
                coeffs = solve_mie(spec, medium)
                pert = complex(mie_far_field(coeffs, xhat, d))
            else:
                pert = farfield_perturbation(cls, U, U, gU, gU, M, spec, medium, e0)
                if mode is SynthesisMode.ASYMPTOTIC_WITH_REMAINDER:
                    pert += c_ff * farfield_remainder(cls)[0](delta) * U * U
            far.append(FarFieldSample(xhat.copy(), d.copy(), z.copy(), before, before + pert))
            if radius is None:
                continue
            for e in plan.near_directions:
                e = np.asarray(e, float) / np.linalg.norm(e)
                for f in plan.radius_factors:
                    r = f * radius
                    x = z + r * e
                    if r < NEAR_MIN_DISTANCE * delta:
                        raise ValidityError(f"near point at distance {r:.3g} is closer than "
                                            f"{NEAR_MIN_DISTANCE:g} delta")
                    nb = back.scattered(x)
                    if mode is SynthesisMode.MIE_EXACT:
                        pert = complex(mie_near_field(coeffs, x, d))
                    elif mode is SynthesisMode.ASYMPTOTIC_LEADING and magnetic:
                        pert = near_zone_leading(U, gU, e, r, M0_HIGH_CONTRAST, spec, medium, e0)
                    else:
                        G, gG = back.greens(x, z)
                        pert = nearfield_perturbation(cls, G, gG, U, gU, M, spec, medium, r, e0)
                        if mode is SynthesisMode.ASYMPTOTIC_WITH_REMAINDER:
                            rem = sum(term(delta, r) for term in nearfield_remainder(cls))
                            pert += U * rem / (4.0 * math.pi)
                    near.append(NearFieldSample(x, z.copy(), d.copy(), nb, nb + pert))

    if noise > 0:
        rng = np.random.default_rng(seed)
        n = len(far) + len(near)
        g = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2.0)
        factors = 1.0 + noise * g
        far = [FarFieldSample(s.xhat, s.d, s.z, s.value_before, s.value_after * f)
               for s, f in zip(far, factors[:len(far)])]
        near = [NearFieldSample(s.x, s.z, s.d, s.value_before, s.value_after * f)
                for s, f in zip(near, factors[len(far):])]

    echo = {"omega": medium.omega, "mu0": medium.mu0, "eps0_exterior": medium.eps0_exterior,
            "delta": delta, "eps1": tmpl.eps1, "mu1": tmpl.mu1, "d": d.tolist(),
            "class": cls.kind.value, "alpha": cls.alpha}
    return SyntheticDataset(mode, noise, seed, z_grid, far, near, echo)
