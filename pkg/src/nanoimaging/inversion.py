"""Reconstruction of the background permittivity from before/after data.

Electric particles: the backscatter perturbation gives ``U(z, d)^2``; a
square root with a consistent branch and a discrete Laplacian then give
``eps0 = -Laplace(U) / (w^2 mu0 U)``.

Magnetic particles: near-field data around ``z`` give ``grad U(z, d)``, the
backscatter perturbation then gives ``A = (eps1 - eps0) U^2``, the divergence
of the gradient gives ``B = eps0 U``, and ``eps0`` is the positive root of
``A eps0^2 - (eps1 - eps0) B^2 = 0``.
"""

from __future__ import annotations

import logging
import math
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import NearFieldSample, SyntheticDataset
from .background import plane_wave
from .grid import FieldGrid
from .mie import farfield_constant
from .scenario import Medium, ParticleSpec, Scenario
from .surface_potentials import M0_HIGH_CONTRAST

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.1  # relative to max |U|
QUADRATIC_IMAG_TOL = 1e-6
DIRECTION_COND_MAX = 1e3


class ReconstructionError(RuntimeError):
    pass


class ConfigurationError(ValueError):
    pass


class InconsistentDataError(ValueError):
    pass


@dataclass(eq=False)
class ReconstructionResult:
    eps0_map: FieldGrid  # real part; NaN off the mask
    mask: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    branch_flips: int = 0
    eps0_imag: FieldGrid | None = None

    def error_against(self, truth) -> float:
        """Relative max error on the mask against a reference map or constant."""
        t = truth.values if isinstance(truth, FieldGrid) else np.full(self.mask.shape, float(truth))
        m = self.mask
        return float(np.max(np.abs(self.eps0_map.values[m] - t[m]) / np.abs(t[m])))


# -- electric ---------------------------------------------------------------------

def recover_Usq_electric(dataset: SyntheticDataset, spec: ParticleSpec, medium: Medium,
                         contrast: str = "exact", eps0_map: np.ndarray | None = None) -> FieldGrid:
    """``U(z, d)^2`` from the backscatter perturbation on the z-grid.

    ``contrast="exact"`` divides by ``eps1 - eps0`` with ``eps0`` the exterior
    value (or ``eps0_map`` when given); ``"leading"`` divides by ``eps1``
    alone, the large part of the contrast.
    """
    diff = dataset.backscatter_difference()
    if contrast == "exact":
        e0 = medium.eps0_exterior if eps0_map is None else np.asarray(eps0_map, float)
        dc = spec.eps1 - e0
    elif contrast == "leading":
        dc = spec.eps1
    else:
        raise ValueError(f"unknown contrast rule {contrast!r}")
    if np.any(np.asarray(dc) == 0):
        raise ConfigurationError("eps1 equals the background permittivity: the data carry no signal")
    denom = farfield_constant() * medium.omega ** 2 * medium.mu0 * dc * spec.volume
    return dataset.z_grid.with_values(diff / denom)


@dataclass(eq=False)
class BranchResult:
    field: FieldGrid
    mask: np.ndarray
    flips: int
    anchors: list


def _neighbours(idx, dims):
    for ax in range(3):
        for s in (-1, 1):
            j = list(idx)
            j[ax] += s
            if 0 <= j[ax] < dims[ax]:
                yield tuple(j), ax, s


def branch_sqrt(Usq: FieldGrid, reference=None, threshold: float = DEFAULT_THRESHOLD,
                mask: np.ndarray | None = None) -> BranchResult:
    """Square root of ``Usq`` with a spatially consistent sign.

    The root at the anchor (largest ``|Usq|``) is aligned with ``reference``
    (a grid or a complex number; default 1). A breadth-first sweep then picks,
    at each voxel, the root closest to the mean of linear extrapolations from
    already assigned neighbours (the neighbour value itself when no second
    point is available). Voxels where the plain neighbour mean would have
    picked the other root are counted as flips; they mark zero crossings.
    Each connected component of the mask gets its own anchor.
    """
    vals = np.asarray(Usq.values, complex)
    dims = Usq.dims
    mod = np.abs(vals)
    if mask is None:
        mask = mod >= (threshold ** 2) * mod.max()
    mask = mask.copy()
    roots = np.sqrt(vals)
    out = np.full(dims, np.nan + 0j)
    assigned = np.zeros(dims, bool)
    flips = 0
    anchors = []

    def ref_at(idx):
        if reference is None:
            return 1.0 + 0j
        if isinstance(reference, FieldGrid):
            return complex(reference.values[idx])
        return complex(reference)

    while True:
        free = mask & ~assigned
        if not free.any():
            break
        anchor = np.unravel_index(np.argmax(np.where(free, mod, -1.0)), dims)
        if anchors:
            log.info("branch_sqrt: disconnected component, new anchor at %s", anchor)
        anchors.append(tuple(int(a) for a in anchor))
        s = roots[anchor]
        out[anchor] = s if (s * np.conj(ref_at(anchor))).real >= 0 else -s
        assigned[anchor] = True
        queue = deque([anchor])
        while queue:
            v = queue.popleft()
            for nb, _, _ in _neighbours(v, dims):
                if not mask[nb] or assigned[nb]:
                    continue
                extrap, plain = [], []
                for n, ax, sgn in _neighbours(nb, dims):
                    if not assigned[n]:
                        continue
                    plain.append(out[n])
                    nn = list(n)
                    nn[ax] += sgn
                    nn = tuple(nn)
                    if 0 <= nn[ax] < dims[ax] and assigned[nn]:
                        extrap.append(2 * out[n] - out[nn])
                    else:
                        extrap.append(out[n])
                target = np.mean(extrap)
                r = roots[nb]
                choice = r if abs(r - target) <= abs(-r - target) else -r
                pm = np.mean(plain)
                if (abs(r - pm) <= abs(-r - pm)) != (choice == r):
                    flips += 1
                out[nb] = choice
                assigned[nb] = True
                queue.append(nb)
    return BranchResult(Usq.with_values(out), mask, flips, anchors)


def discrete_laplacian(f: FieldGrid) -> FieldGrid:
    """Seven-point Laplacian on interior voxels; boundary voxels hold NaN."""
    if min(f.dims) < 3:
        raise ValueError("the Laplacian stencil needs at least 3 points per axis")
    v = np.asarray(f.values)
    h2 = f.spacing ** 2
    lap = np.full(v.shape, np.nan, dtype=np.result_type(v.dtype, float))
    c = v[1:-1, 1:-1, 1:-1]
    lap[1:-1, 1:-1, 1:-1] = (
        (v[2:, 1:-1, 1:-1] - 2 * c + v[:-2, 1:-1, 1:-1])
        + (v[1:-1, 2:, 1:-1] - 2 * c + v[1:-1, :-2, 1:-1])
        + (v[1:-1, 1:-1, 2:] - 2 * c + v[1:-1, 1:-1, :-2])) / h2
    return f.with_values(lap)


def recover_eps0_electric(U: FieldGrid, medium: Medium, threshold: float = DEFAULT_THRESHOLD,
                          absolute_threshold: float | None = None) -> ReconstructionResult:
    """``eps0 = Re(-Laplace U / U) / (w^2 mu0)`` where ``|U|`` is above the threshold."""
    vals = np.asarray(U.values, complex)
    mod = np.abs(np.nan_to_num(vals))
    tau = absolute_threshold if absolute_threshold is not None else threshold * mod.max()
    mask = U.interior_mask() & (mod >= tau) & (mod > 0) & np.isfinite(vals)
    if not mask.any():
        raise ReconstructionError("empty mask: |U| is below the threshold everywhere")
    lap = discrete_laplacian(U).values
    mask &= np.isfinite(lap)
    k2 = np.full(U.dims, np.nan + 0j)
    k2[mask] = -lap[mask] / vals[mask]
    eps = k2 / (medium.omega ** 2 * medium.mu0)
    imag = np.abs(eps.imag)
    diag = {"threshold": float(tau), "mask_fraction": float(mask.mean()),
            "max_imag": float(np.nanmax(np.where(mask, imag, np.nan)))}
    return ReconstructionResult(U.with_values(eps.real), mask, diag, 0, U.with_values(eps.imag))


# -- magnetic ---------------------------------------------------------------------

def recover_gradU_magnetic(samples: list[NearFieldSample], spec: ParticleSpec, medium: Medium,
                           m0: float = M0_HIGH_CONTRAST) -> np.ndarray:
    """``grad U(z, d)`` from near-field perturbations around ``spec.z``.

    For each direction ``e`` the scaled data ``f(r) = (r^2/delta^3)(V_s - U_s)``
    behave like ``-m0 |B| <e, grad U> / (4 pi) + b r``; with two radii the
    monopole slope ``b`` is eliminated, with one it is neglected.
    """
    z = spec.z
    groups: dict[tuple, list[tuple[float, complex]]] = {}
    units = {}
    for s in samples:
        rel = s.x - z
        r = float(np.linalg.norm(rel))
        e = rel / r
        key = tuple(np.round(e, 9))
        units[key] = e
        groups.setdefault(key, []).append((r, (r * r / spec.delta ** 3) * (s.value_after - s.value_before)))
    if len(groups) < 3:
        raise ConfigurationError("need near data in at least three directions")
    E, a = [], []
    for key, pts in groups.items():
        pts.sort()
        if len(pts) == 1:
            a.append(pts[0][1])
        else:
            (r1, f1), (r2, f2) = pts[0], pts[1]
            a.append((r2 * f1 - r1 * f2) / (r2 - r1))
        E.append(units[key])
    E = np.array(E)
    cond = np.linalg.cond(E)
    if cond > DIRECTION_COND_MAX:
        raise ConfigurationError(f"near-point directions are nearly coplanar (condition number {cond:.3g})")
    rhs = -4.0 * math.pi * np.array(a) / (m0 * spec.body.volume)
    if len(E) == 3:
        return np.linalg.solve(E, rhs)
    return np.linalg.lstsq(E, rhs, rcond=None)[0]


def recover_A_magnetic(backscatter_difference: complex, gradU, spec: ParticleSpec, medium: Medium,
                       m0: float = M0_HIGH_CONTRAST) -> complex:
    """``A = (eps1 - eps0) U^2`` from the backscatter perturbation and ``grad U``."""
    B = spec.body.volume
    g = np.asarray(gradU)
    mono = backscatter_difference / (farfield_constant() * spec.delta ** 3) + m0 * B * np.dot(g, g)
    return complex(mono / (medium.omega ** 2 * medium.mu0 * B))


def recover_B_magnetic(gradU: FieldGrid, medium: Medium) -> FieldGrid:
    """``B = eps0 U = -div(grad U) / (w^2 mu0)`` by central differences; NaN on the boundary."""
    if min(gradU.dims) < 3:
        raise ValueError("central differences need at least 3 points per axis")
    g = np.asarray(gradU.values)
    if g.shape != gradU.dims + (3,):
        raise ValueError("gradU must have three components per voxel")
    h = gradU.spacing
    div = np.full(gradU.dims, np.nan + 0j)
    div[1:-1, 1:-1, 1:-1] = (
        (g[2:, 1:-1, 1:-1, 0] - g[:-2, 1:-1, 1:-1, 0])
        + (g[1:-1, 2:, 1:-1, 1] - g[1:-1, :-2, 1:-1, 1])
        + (g[1:-1, 1:-1, 2:, 2] - g[1:-1, 1:-1, :-2, 2])) / (2.0 * h)
    return gradU.with_values(-div / (medium.omega ** 2 * medium.mu0))


def solve_eps0_quadratic(A, B, eps1: float, return_residual: bool = False,
                         imag_tol: float = QUADRATIC_IMAG_TOL):
    """Positive root of ``A eps0^2 + B^2 eps0 - eps1 B^2 = 0``.

    With ``a = A / B^2`` (real for consistent data) the root is
    ``2 eps1 / (1 + sqrt(1 + 4 a eps1))``, which avoids cancellation when
    ``a`` is small. ``|Im a|`` is the consistency residual.
    """
    if eps1 <= 0:
        raise ValueError("eps1 must be positive")
    if B == 0:
        raise InconsistentDataError("B = 0: the background field vanishes at this point")
    a = complex(A) / complex(B) ** 2
    resid = abs(a.imag)
    if resid > imag_tol * max(1.0, abs(a)):
        warnings.warn(f"A/B^2 has imaginary part {resid:.3g}; data only approximately consistent",
                      stacklevel=2)
    disc = 1.0 + 4.0 * a.real * eps1
    if disc < 0:
        raise InconsistentDataError("no real root: the quadratic has negative discriminant")
    root = 2.0 * eps1 / (1.0 + math.sqrt(disc))
    if not root > 0:
        raise InconsistentDataError("no positive root")
    return (root, resid) if return_residual else root


# -- pipelines -------------------------------------------------------------------

def _reference_wave(scenario: Scenario, grid: FieldGrid) -> FieldGrid:
    return grid.with_values(plane_wave(scenario.medium.kappa0, scenario.d, grid.points()))


def run_electric_pipeline(dataset: SyntheticDataset, scenario: Scenario,
                          threshold: float = DEFAULT_THRESHOLD, contrast: str = "exact",
                          eps0_map: np.ndarray | None = None) -> ReconstructionResult:
    """Backscatter data to ``U^2``, branch-consistent ``U``, Laplacian, ``eps0``.

    The contrast in the first step uses the exterior permittivity unless a
    prior ``eps0_map`` on the z-grid is supplied.
    """
    medium, spec = scenario.medium, scenario.particle
    Usq = recover_Usq_electric(dataset, spec, medium, contrast, eps0_map)
    br = branch_sqrt(Usq, _reference_wave(scenario, dataset.z_grid), threshold)
    res = recover_eps0_electric(br.field, medium, threshold)
    res.branch_flips = br.flips
    res.diagnostics.update({"branch_flips": br.flips, "anchors": br.anchors, "contrast": contrast})
    return res


def run_magnetic_pipeline(dataset: SyntheticDataset, scenario: Scenario,
                          threshold: float = DEFAULT_THRESHOLD,
                          m0: float = M0_HIGH_CONTRAST) -> ReconstructionResult:
    """Near data to ``grad U``, then ``A``, ``B`` and the quadratic root at every interior ``z``."""
    medium, tmpl = scenario.medium, scenario.particle
    g = dataset.z_grid
    near: dict[tuple, list] = {}
    for s in dataset.near:
        near.setdefault(g.index_of(s.z), []).append(s)
    if not near:
        raise ReconstructionError("dataset has no near-field samples")
    zs = g.points()
    grad = np.empty(g.dims + (3,), complex)
    for idx in np.ndindex(g.dims):
        grad[idx] = recover_gradU_magnetic(near[idx], tmpl.at(zs[idx]), medium, m0)
    diff = dataset.backscatter_difference()
    A = np.empty(g.dims, complex)
    for idx in np.ndindex(g.dims):
        A[idx] = recover_A_magnetic(diff[idx], grad[idx], tmpl.at(zs[idx]), medium, m0)
    Bgrid = recover_B_magnetic(g.with_values(grad), medium)
    B = Bgrid.values
    modB = np.abs(np.nan_to_num(B))
    mask = g.interior_mask() & (modB >= threshold * modB.max()) & (modB > 0)
    if not mask.any():
        raise ReconstructionError("empty mask: |B| is below the threshold everywhere")
    eps = np.full(g.dims, np.nan)
    resid = np.full(g.dims, np.nan)
    failures = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for idx in zip(*np.nonzero(mask)):
            try:
                eps[idx], resid[idx] = solve_eps0_quadratic(A[idx], B[idx], tmpl.eps1, return_residual=True)
            except InconsistentDataError:
                mask[idx] = False
                failures += 1
    diag = {"mask_fraction": float(mask.mean()), "quadratic_failures": failures,
            "max_imag_ratio": float(np.nanmax(resid)) if mask.any() else math.nan}
    return ReconstructionResult(g.with_values(eps), mask, diag, 0, g.with_values(resid))
