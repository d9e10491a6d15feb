"""Background fields for a variable permittivity via a volume integral equation.

The total field solves

    U(x) = exp(i k x.d) + int (k(y)^2 - k^2) Phi_k(x, y) U(y) dy,

with ``k`` the exterior wavenumber and ``Phi_k(x, y) = exp(i k r) / (4 pi r)``.
The integral is discretised by the midpoint rule on the voxels of the
permittivity grid; the self voxel uses the exact integral of ``Phi_k`` over
the ball of equal volume. Only voxels with nonzero contrast carry unknowns.
"""

from __future__ import annotations

import logging
import math
import weakref
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse.linalg as spla
from scipy.interpolate import RegularGridInterpolator

from .grid import FieldGrid
from .mie import farfield_constant
from .scenario import Medium

log = logging.getLogger(__name__)

# OpenMP is always shipped with numba wheels; the TBB probe only produces noise here
if numba.config.THREADING_LAYER == "default":
    numba.config.THREADING_LAYER = "omp"

LS_TOLERANCE = 1e-10
LS_MAXITER = 400


class ConvergenceError(RuntimeError):
    """The volume integral iteration failed to reach its residual target."""


# -- kernels -------------------------------------------------------------------

def ball_self_term(kappa: float, h: float) -> complex:
    """``int_{|y| < R} Phi_kappa(y) dy`` for the ball with volume ``h^3``."""
    R = (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0) * h
    if kappa * R < 1e-4:
        return complex(R * R / 2.0 + 1j * kappa * R ** 3 / 3.0)
    return complex(((1.0 - 1j * kappa * R) * np.exp(1j * kappa * R) - 1.0) / kappa ** 2)


def phi(kappa: float, r):
    r = np.asarray(r, float)
    return np.exp(1j * kappa * r) / (4.0 * math.pi * r)


def grad_phi(kappa: float, x, z):
    """Gradient in ``x`` of ``Phi_kappa(x, z)``."""
    rel = np.asarray(x, float) - np.asarray(z, float)
    r = np.linalg.norm(rel, axis=-1, keepdims=True)
    return rel / r * np.exp(1j * kappa * r) * (1j * kappa * r - 1.0) / (4.0 * math.pi * r ** 2)


def kernel_table(dims, h: float, kappa: float) -> np.ndarray:
    """``h^3 Phi_kappa`` on all non-negative integer offsets; entry 0 is the self term."""
    a = [np.arange(n) for n in dims]
    I, J, K = np.meshgrid(*a, indexing="ij")
    r = h * np.sqrt(I ** 2 + J ** 2 + K ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        T = h ** 3 * np.exp(1j * kappa * r) / (4.0 * math.pi * r)
    T[0, 0, 0] = ball_self_term(kappa, h)
    return T


@numba.njit(parallel=True, cache=True)
def _apply(T, tgt, src, dens, out):
    for a in numba.prange(tgt.shape[0]):
        i0, i1, i2 = tgt[a, 0], tgt[a, 1], tgt[a, 2]
        s = 0j
        for b in range(src.shape[0]):
            s += T[abs(i0 - src[b, 0]), abs(i1 - src[b, 1]), abs(i2 - src[b, 2])] * dens[b]
        out[a] = s


@numba.njit(parallel=True, cache=True)
def _apply_points(kappa, h, self_term, R, pts, ys, dens, out):
    w = h ** 3 / (4.0 * np.pi)
    for a in numba.prange(pts.shape[0]):
        s = 0j
        for b in range(ys.shape[0]):
            d0 = pts[a, 0] - ys[b, 0]
            d1 = pts[a, 1] - ys[b, 1]
            d2 = pts[a, 2] - ys[b, 2]
            r = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
            if r < R:
                s += self_term * dens[b]
            else:
                s += w * np.exp(1j * kappa * r) / r * dens[b]
        out[a] = s


@numba.njit(parallel=True, cache=True)
def _apply_points_grad(kappa, h, pts, ys, dens, out):
    w = h ** 3 / (4.0 * np.pi)
    for a in numba.prange(pts.shape[0]):
        g0 = 0j
        g1 = 0j
        g2 = 0j
        for b in range(ys.shape[0]):
            d0 = pts[a, 0] - ys[b, 0]
            d1 = pts[a, 1] - ys[b, 1]
            d2 = pts[a, 2] - ys[b, 2]
            r = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
            if r < 1e-12 * h:
                continue
            f = w * np.exp(1j * kappa * r) * (1j * kappa * r - 1.0) / (r * r * r) * dens[b]
            g0 += f * d0
            g1 += f * d1
            g2 += f * d2
        out[a, 0] = g0
        out[a, 1] = g1
        out[a, 2] = g2


# -- solver ----------------------------------------------------------------------

@dataclass(frozen=True)
class SolveInfo:
    iterations: int
    residual: float


class VolumeOperator:
    """Discrete volume integral operator attached to one ``Medium``."""

    def __init__(self, medium: Medium):
        if medium.eps0_field is None:
            raise ValueError("medium has no permittivity grid")
        g = medium.eps0_field
        self.medium = medium
        self.grid = g
        self.kappa = medium.kappa0
        self.h = g.spacing
        contrast = medium.omega ** 2 * medium.mu0 * (np.asarray(g.values, float) - medium.eps0_exterior)
        self.contrast = contrast
        self.support = np.argwhere(contrast != 0.0).astype(np.int64)
        self.q = contrast[tuple(self.support.T)].astype(complex)
        self.all_nodes = np.argwhere(np.ones(g.dims, bool)).astype(np.int64)
        self.points = g.points()
        self.support_points = self.points[tuple(self.support.T)]
        self.table = kernel_table(g.dims, self.h, self.kappa)
        self.self_term = complex(self.table[0, 0, 0])
        self.R = (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0) * self.h

    @property
    def n_support(self) -> int:
        return len(self.support)

    def apply_support(self, dens: np.ndarray) -> np.ndarray:
        out = np.empty(self.n_support, complex)
        _apply(self.table, self.support, self.support, np.ascontiguousarray(dens, complex), out)
        return out

    def apply_nodes(self, dens: np.ndarray) -> np.ndarray:
        out = np.empty(len(self.all_nodes), complex)
        _apply(self.table, self.all_nodes, self.support, np.ascontiguousarray(dens, complex), out)
        return out.reshape(self.grid.dims)

    def apply_points(self, pts, dens) -> np.ndarray:
        pts = np.ascontiguousarray(np.asarray(pts, float).reshape(-1, 3))
        out = np.empty(len(pts), complex)
        _apply_points(self.kappa, self.h, self.self_term, self.R, pts,
                      np.ascontiguousarray(self.support_points), np.ascontiguousarray(dens, complex), out)
        return out

    def apply_points_grad(self, pts, dens) -> np.ndarray:
        pts = np.ascontiguousarray(np.asarray(pts, float).reshape(-1, 3))
        out = np.empty((len(pts), 3), complex)
        _apply_points_grad(self.kappa, self.h, pts, np.ascontiguousarray(self.support_points),
                           np.ascontiguousarray(dens, complex), out)
        return out

    def phi_to_point(self, z) -> np.ndarray:
        """``Phi(y_j, z)`` on the support, voxel-averaged where ``y_j`` is within the self ball."""
        r = np.linalg.norm(self.support_points - np.asarray(z, float), axis=-1)
        out = np.empty(self.n_support, complex)
        near = r < self.R
        out[~near] = phi(self.kappa, r[~near])
        out[near] = self.self_term / self.h ** 3
        return out

    def solve(self, rhs: np.ndarray, tol: float = LS_TOLERANCE) -> tuple[np.ndarray, SolveInfo]:
        """Solve ``v - A (q v) = rhs`` on the support."""
        n = self.n_support
        if n == 0:
            return rhs.copy(), SolveInfo(0, 0.0)
        op = spla.LinearOperator((n, n), matvec=lambda v: v - self.apply_support(self.q * v), dtype=complex)
        count = [0]

        def cb(_):
            count[0] += 1

        v, info = spla.gmres(op, rhs, rtol=tol, atol=0.0, restart=60, maxiter=LS_MAXITER,
                             callback=cb, callback_type="pr_norm")
        res = float(np.linalg.norm(op.matvec(v) - rhs) / np.linalg.norm(rhs))
        if info != 0 or res > 1e2 * tol:
            rho = self.spectral_radius_estimate()
            raise ConvergenceError(
                f"volume solver stalled (residual {res:.2e}); estimated spectral radius of the "
                f"contrast operator {rho:.3f}: reduce omega or the permittivity contrast")
        return v, SolveInfo(count[0], res)

    def spectral_radius_estimate(self, steps: int = 30) -> float:
        rng = np.random.default_rng(0)
        v = rng.standard_normal(self.n_support) + 0j
        lam = 0.0
        for _ in range(steps):
            w = self.apply_support(self.q * v)
            lam = np.linalg.norm(w) / np.linalg.norm(v)
            v = w / np.linalg.norm(w)
        return float(lam)


_operators: "weakref.WeakKeyDictionary[Medium, VolumeOperator]" = weakref.WeakKeyDictionary()


def volume_operator(medium: Medium) -> VolumeOperator:
    op = _operators.get(medium)
    if op is None:
        op = VolumeOperator(medium)
        _operators[medium] = op
    return op


def _unit(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v)


def plane_wave(kappa: float, d, x) -> np.ndarray:
    return np.exp(1j * kappa * np.tensordot(np.asarray(x, float), _unit(d), axes=([-1], [0])))


# -- public operations ------------------------------------------------------------

def ls_solve(medium: Medium, d, grid: FieldGrid | None = None, return_info: bool = False):
    """Background total field ``U^t(., d)`` on the permittivity grid.

    For a homogeneous medium the plane wave is returned on ``grid`` (or on
    the permittivity grid when present).
    """
    d = _unit(d)
    if medium.eps0_field is None or medium.homogeneous:
        g = grid if grid is not None else medium.eps0_field
        if g is None:
            raise ValueError("a grid is required for a medium without a permittivity map")
        U = g.with_values(plane_wave(medium.kappa0, d, g.points()))
        info = SolveInfo(0, 0.0)
        return (U, info) if return_info else U
    op = volume_operator(medium)
    inc_support = plane_wave(op.kappa, d, op.support_points)
    v, info = op.solve(inc_support)
    values = plane_wave(op.kappa, d, op.points) + op.apply_nodes(op.q * v)
    log.debug("ls_solve: %d unknowns, %d iterations, residual %.2e", op.n_support, info.iterations, info.residual)
    U = op.grid.with_values(values)
    return (U, info) if return_info else U


def ls_residual(medium: Medium, U: FieldGrid, d) -> float:
    """Relative residual of the discrete integral equation for a field on the grid."""
    d = _unit(d)
    inc = plane_wave(medium.kappa0, d, U.points())
    if medium.eps0_field is None or medium.homogeneous:
        return float(np.linalg.norm(U.values - inc) / np.linalg.norm(inc))
    op = volume_operator(medium)
    vs = U.values[tuple(op.support.T)]
    rhs = inc + op.apply_nodes(op.q * vs)
    return float(np.linalg.norm(U.values - rhs) / np.linalg.norm(inc))


def _support_density(medium: Medium, U: FieldGrid):
    op = volume_operator(medium)
    return op, op.q * U.values[tuple(op.support.T)]


def field_at(medium: Medium, U: FieldGrid, d, x) -> np.ndarray:
    """Evaluate ``U^t`` at arbitrary points through the integral representation."""
    x = np.asarray(x, float)
    inc = plane_wave(medium.kappa0, d, x)
    if medium.eps0_field is None or medium.homogeneous:
        return inc
    op, dens = _support_density(medium, U)
    return inc + op.apply_points(x, dens).reshape(x.shape[:-1])


def ls_gradient(medium: Medium, U: FieldGrid, d, x=None) -> np.ndarray:
    """Gradient of ``U^t`` by differentiating the integral representation."""
    d = _unit(d)
    x = U.points() if x is None else np.asarray(x, float)
    inc = plane_wave(medium.kappa0, d, x)
    grad = 1j * medium.kappa0 * inc[..., None] * d
    if medium.eps0_field is None or medium.homogeneous:
        return grad
    op, dens = _support_density(medium, U)
    return grad + op.apply_points_grad(x, dens).reshape(x.shape)


def grid_gradient(U: FieldGrid) -> FieldGrid:
    """Central differences inside, second-order one-sided differences at the boundary."""
    g = np.stack(np.gradient(U.values, U.spacing, edge_order=2), axis=-1)
    return U.with_values(g)


def background_farfield(medium: Medium, U: FieldGrid, xhat) -> np.ndarray:
    """``U^inf(xhat, d)`` from the contrast-weighted field on the grid."""
    xhat = np.asarray(xhat, float)
    if medium.eps0_field is None or medium.homogeneous:
        return np.zeros(xhat.shape[:-1], complex)
    op, dens = _support_density(medium, U)
    phase = np.exp(-1j * op.kappa * (xhat.reshape(-1, 3) @ op.support_points.T))
    ff = farfield_constant() * op.h ** 3 * (phase @ dens)
    return ff.reshape(xhat.shape[:-1])


@dataclass(frozen=True, eq=False)
class GreensEval:
    source: np.ndarray
    points: np.ndarray
    values: np.ndarray
    gradients: np.ndarray


class GreensFunction:
    """Green's function of the background with one fixed source point ``z``.

    ``G = Phi_k(., z) + w`` where the correction ``w`` is smooth away from the
    contrast; it is tabulated on the grid and interpolated.
    """

    def __init__(self, medium: Medium, z):
        self.medium = medium
        self.z = np.asarray(z, float).reshape(3)
        self.kappa = medium.kappa0
        if medium.eps0_field is None or medium.homogeneous:
            self.op = None
            return
        op = volume_operator(medium)
        if not op.grid.contains(self.z):
            raise ValueError("source point outside the permittivity grid")
        self.op = op
        a = op.phi_to_point(self.z)
        self.support_values, self.info = op.solve(a)  # G on the support
        self.density = op.q * self.support_values
        self.correction = op.grid.with_values(op.apply_nodes(self.density))
        self._interp = None

    def _w(self, x):
        if self._interp is None:
            g = self.correction
            self._interp = RegularGridInterpolator(g.axes(), g.values, method="cubic")
        return self._interp(x.reshape(-1, 3)).reshape(x.shape[:-1])

    def correction_at(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        if self.op is None:
            return np.zeros(x.shape[:-1], complex)
        return self._w(x)

    def __call__(self, x) -> GreensEval:
        x = np.asarray(x, float)
        r = np.linalg.norm(x - self.z, axis=-1)
        if np.any(r == 0):
            raise ValueError("evaluation point coincides with the source")
        vals = phi(self.kappa, r)
        grads = grad_phi(self.kappa, x, self.z)
        if self.op is not None:
            h = 0.5 * self.op.h
            vals = vals + self._w(x)
            lo = self.op.grid.origin
            hi = lo + self.op.h * (np.asarray(self.op.grid.dims) - 1)
            for k in range(3):
                e = np.zeros(3)
                e[k] = h
                xp = np.clip(x + e, lo, hi)
                xm = np.clip(x - e, lo, hi)
                step = (xp - xm)[..., k]
                grads[..., k] = grads[..., k] + (self._w(xp) - self._w(xm)) / step
        return GreensEval(self.z, x, vals, grads)

    def far_field(self, xhat) -> np.ndarray:
        """Far-field pattern of ``G(., z)``."""
        xhat = np.asarray(xhat, float)
        c = farfield_constant()
        direct = np.exp(-1j * self.kappa * (xhat @ self.z))
        if self.op is None:
            return c * direct
        phase = np.exp(-1j * self.kappa * (xhat.reshape(-1, 3) @ self.op.support_points.T))
        scat = self.op.h ** 3 * (phase @ self.density)
        return c * (direct + scat.reshape(xhat.shape[:-1]))


def greens_function(medium: Medium, z, points) -> GreensEval:
    return GreensFunction(medium, z)(points)


def total_field_at(medium: Medium, z, d) -> complex:
    """``U^t(z, d)`` at one point, consistent with the discrete Green's function."""
    d = _unit(d)
    inc = complex(plane_wave(medium.kappa0, d, np.asarray(z, float)))
    if medium.eps0_field is None or medium.homogeneous:
        return inc
    op = volume_operator(medium)
    U = ls_solve(medium, d)
    dens = op.q * U.values[tuple(op.support.T)]
    return inc + complex(op.h ** 3 * np.dot(op.phi_to_point(z), dens))


def mixed_reciprocity_constant(kappa: float = 1.0) -> complex:
    """Ratio ``U^t(z, -xhat) / G^inf(xhat, z)`` in a homogeneous medium."""
    medium = Medium(omega=kappa)
    z = np.array([0.1, -0.2, 0.3])
    xhat = _unit([0.3, 0.4, -0.5])
    g_inf = GreensFunction(medium, z).far_field(xhat)
    return complex(total_field_at(medium, z, -xhat) / g_inf)


def mixed_reciprocity_check(medium: Medium, z, xhat) -> float:
    """Relative deviation between ``c G^inf(xhat, z)`` and ``U^t(z, -xhat)``."""
    xhat = _unit(xhat)
    c = mixed_reciprocity_constant()
    lhs = c * GreensFunction(medium, z).far_field(xhat)
    rhs = total_field_at(medium, z, -xhat)
    return float(abs(lhs - rhs) / abs(rhs))


def gaussian_bump(n: int, spacing: float, amplitude: float, width: float,
                  eps_exterior: float = 1.0, cutoff: float = 1e-6) -> FieldGrid:
    """``eps_ext + a exp(-|x|^2 / w^2)`` on a centred grid, zeroed below ``cutoff * a``.

    The truncation gives the contrast compact support; the outer layer of
    the grid must end up at ``eps_ext``.
    """
    g = FieldGrid.centered(n, spacing)
    r2 = np.sum(g.points() ** 2, axis=-1)
    bump = amplitude * np.exp(-r2 / width ** 2)
    bump[np.abs(bump) < cutoff * abs(amplitude)] = 0.0
    bump[g.boundary_mask()] = 0.0
    return g.with_values(eps_exterior + bump)
