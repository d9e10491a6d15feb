"""Static layer potentials on triangulated surfaces and the polarization tensor.

One collocation point (the centroid) per flat triangle. Conventions follow
the kernel ``1/(4 pi |x - y|)``, for which the double layer maps the constant
density to ``-1/2`` on the surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

#: High-permeability limit of ``M / |B|`` for a ball.
M0_HIGH_CONTRAST = -1.5


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PanelQuadrature:
    centroids: np.ndarray
    normals: np.ndarray
    areas: np.ndarray

    def __len__(self):
        return len(self.areas)

    @property
    def closure_defect(self) -> float:
        """Norm of the summed area vectors divided by the total area (zero when closed)."""
        return float(np.linalg.norm(self.areas @ self.normals) / self.areas.sum())

    def scaled(self, factor: float) -> "PanelQuadrature":
        return PanelQuadrature(self.centroids * factor, self.normals, self.areas * factor ** 2)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def quadrature(self) -> PanelQuadrature:
        v = self.vertices[self.faces]
        cross = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        twice_area = np.linalg.norm(cross, axis=1)
        if np.any(twice_area <= 1e-300):
            raise MeshError("degenerate (zero-area) panel")
        normals = cross / twice_area[:, None]
        centroids = v.mean(axis=1)
        areas = 0.5 * twice_area
        # orient outward: signed volume must be positive
        if np.sum(areas * np.einsum("ij,ij->i", centroids, normals)) < 0:
            normals = -normals
        return PanelQuadrature(centroids, normals, areas)


def icosphere(level: int = 3, radius: float = 1.0) -> TriangleMesh:
    """Icosahedron refined ``level`` times, vertices projected to the sphere (``20 * 4**level`` panels)."""
    p = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [(-1, p, 0), (1, p, 0), (-1, -p, 0), (1, -p, 0),
             (0, -1, p), (0, 1, p), (0, -1, -p), (0, 1, -p),
             (p, 0, -1), (p, 0, 1), (-p, 0, -1), (-p, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(v, float) / np.linalg.norm(v) for v in verts]
    for _ in range(level):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return TriangleMesh(radius * np.array(verts), np.array(faces, dtype=np.int64))


def read_off(path: str | Path) -> TriangleMesh:
    """Read an ASCII OFF triangle mesh."""
    tokens = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise MeshError("missing OFF header")
    nv, nf = int(tokens[1]), int(tokens[2])
    pos = 4
    verts = np.array(tokens[pos:pos + 3 * nv], float).reshape(nv, 3)
    pos += 3 * nv
    faces = []
    for _ in range(nf):
        k = int(tokens[pos])
        if k != 3:
            raise MeshError("only triangular faces are supported")
        faces.append([int(t) for t in tokens[pos + 1:pos + 4]])
        pos += 1 + k
    return TriangleMesh(verts, np.array(faces, dtype=np.int64))


def write_off(mesh: TriangleMesh, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{len(mesh.vertices)} {len(mesh.faces)} 0\n")
        for v in mesh.vertices:
            fh.write(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")


def _pairwise(mesh: PanelQuadrature):
    diff = mesh.centroids[:, None, :] - mesh.centroids[None, :, :]  # c_i - c_j
    dist = np.linalg.norm(diff, axis=-1)
    np.fill_diagonal(dist, 1.0)
    return diff, dist


def assemble_S0(mesh: PanelQuadrature) -> np.ndarray:
    """Single layer ``S0[i, j] ~ int_{panel j} 1/(4 pi |c_i - y|) ds(y)``.

    Self-panels use the disk of equal area, on which the integral is ``R/2``.
    """
    if np.any(mesh.areas <= 0):
        raise MeshError("degenerate (zero-area) panel")
    _, dist = _pairwise(mesh)
    A = mesh.areas[None, :] / (4.0 * math.pi * dist)
    np.fill_diagonal(A, 0.5 * np.sqrt(mesh.areas / math.pi))
    return A


def assemble_Kstar0(mesh: PanelQuadrature) -> np.ndarray:
    """Adjoint double layer, kernel ``<y - x, nu_x> / (4 pi |x - y|^3)``.

    The diagonal is chosen so that the weighted transpose (the double layer)
    maps the constant density to exactly ``-1/2``.
    """
    if np.any(mesh.areas <= 0):
        raise MeshError("degenerate (zero-area) panel")
    diff, dist = _pairwise(mesh)
    # K*[i, j] = a_j <c_j - c_i, nu_i> / (4 pi r^3)
    K = -np.einsum("ijk,ik->ij", diff, mesh.normals) / (4.0 * math.pi * dist ** 3) * mesh.areas[None, :]
    np.fill_diagonal(K, 0.0)
    # double layer K[i, j] = a_j K*[j, i] / a_i; its rows must sum to -1/2
    dl_rows = (K.T * mesh.areas[None, :]).sum(axis=1) / mesh.areas
    np.fill_diagonal(K, -0.5 - dl_rows)
    return K


def double_layer_from_adjoint(Kstar: np.ndarray, mesh: PanelQuadrature) -> np.ndarray:
    return Kstar.T * mesh.areas[None, :] / mesh.areas[:, None]


@dataclass(frozen=True)
class PolarizationTensor:
    lam: float
    matrix: np.ndarray
    m0: float
    asymmetry: float = 0.0


def contrast_lambda(mu0: float, mu1: float) -> float:
    if mu1 == mu0:
        raise ValueError("lambda is undefined for mu1 == mu0")
    return 0.5 * (mu0 + mu1) / (mu0 - mu1)


def polarization_tensor(mesh: PanelQuadrature, mu0: float, mu1: float,
                        volume: float | None = None) -> PolarizationTensor:
    """``M_ij = int y_j [lambda + K*]^{-1}(nu_i)`` by dense collocation.

    ``volume`` (``|B|``) only enters the reported ``m0 = tr(M) / (3|B|)``;
    by default it is computed from the mesh.
    """
    lam = contrast_lambda(mu0, mu1)
    if abs(lam) <= 0.5:
        raise ValueError("|lambda| <= 1/2: inside the Neumann-Poincare spectrum")
    K = assemble_Kstar0(mesh)
    system = lam * np.eye(len(mesh)) + K
    rho = scipy.linalg.solve(system, mesh.normals)  # column i solves for nu_i
    raw = (rho * mesh.areas[:, None]).T @ mesh.centroids  # raw[i, j] = sum y_j rho_i a
    asym = float(np.linalg.norm(raw - raw.T) / np.linalg.norm(raw))
    M = 0.5 * (raw + raw.T)
    if volume is None:
        volume = float(np.sum(mesh.areas * np.einsum("ij,ij->i", mesh.centroids, mesh.normals)) / 3.0)
    return PolarizationTensor(lam, M, float(np.trace(M) / (3.0 * volume)), asym)


def ball_polarization_tensor(mu0: float, mu1: float, volume: float = 4.0 * math.pi / 3.0) -> PolarizationTensor:
    """Closed form for a ball: ``3 (mu0 - mu1) / (mu0 + 2 mu1) |B| Id``."""
    lam = contrast_lambda(mu0, mu1) if mu1 != mu0 else math.inf
    m = 3.0 * (mu0 - mu1) / (mu0 + 2.0 * mu1)
    return PolarizationTensor(lam, m * volume * np.eye(3), m)
