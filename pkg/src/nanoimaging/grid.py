"""Rectilinear voxel grids holding sampled fields."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


@dataclass(frozen=True, eq=False)
class FieldGrid:
    """Samples of a (possibly vector valued) field on a uniform grid.

    ``values`` has shape ``dims`` for scalar fields or ``dims + (k,)`` for
    fields with ``k`` components. Point ``(i, j, l)`` sits at
    ``origin + spacing * (i, j, l)``.
    """

    origin: np.ndarray
    spacing: float
    dims: tuple[int, int, int]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(3))
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        if self.spacing <= 0:
            raise ValueError("grid spacing must be positive")
        if len(self.dims) != 3 or min(self.dims) < 2:
            raise ValueError(f"grid needs at least 2 points per axis, got {self.dims}")
        values = np.asarray(self.values)
        if values.shape[:3] != self.dims:
            raise ValueError(f"values shape {values.shape} does not match dims {self.dims}")
        object.__setattr__(self, "values", values)

    @classmethod
    def centered(cls, n: int | tuple[int, int, int], spacing: float, values=None, center=(0.0, 0.0, 0.0)):
        """Grid with ``n`` points per axis, symmetric about ``center``."""
        dims = (n, n, n) if np.isscalar(n) else tuple(n)
        origin = np.asarray(center, float) - 0.5 * spacing * (np.asarray(dims) - 1)
        if values is None:
            values = np.zeros(dims)
        return cls(origin, spacing, dims, values)

    def with_values(self, values) -> "FieldGrid":
        return replace(self, values=np.asarray(values))

    @property
    def shape(self):
        return self.dims

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    def axes(self) -> list[np.ndarray]:
        return [self.origin[k] + self.spacing * np.arange(self.dims[k]) for k in range(3)]

    def points(self) -> np.ndarray:
        """Coordinates of every grid point, shape ``dims + (3,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def index_of(self, x) -> tuple[int, int, int] | None:
        """Index of the grid point at ``x`` or ``None`` if ``x`` is not a node."""
        f = (np.asarray(x, float) - self.origin) / self.spacing
        idx = np.rint(f)
        if np.max(np.abs(f - idx)) > 1e-9 or np.any(idx < 0) or np.any(idx >= self.dims):
            return None
        return tuple(int(i) for i in idx)

    def same_geometry(self, other: "FieldGrid") -> bool:
        return (self.dims == other.dims and abs(self.spacing - other.spacing) <= 1e-12 * self.spacing
                and np.allclose(self.origin, other.origin, rtol=0, atol=1e-12))

    def contains(self, x) -> bool:
        x = np.asarray(x, float)
        lo = self.origin
        hi = self.origin + self.spacing * (np.asarray(self.dims) - 1)
        return bool(np.all(x >= lo - 1e-12) and np.all(x <= hi + 1e-12))

    def interior_mask(self, width: int = 1) -> np.ndarray:
        mask = np.zeros(self.dims, dtype=bool)
        sl = tuple(slice(width, n - width) for n in self.dims)
        mask[sl] = True
        return mask

    def boundary_mask(self, width: int = 1) -> np.ndarray:
        return ~self.interior_mask(width)

    # -- CSV ---------------------------------------------------------------
    def to_csv(self, path: str | Path) -> None:
        """Write ``x,y,z,re,im`` rows in row-major (C) voxel order."""
        if self.values.ndim != 3:
            raise ValueError("only scalar grids can be written as CSV")
        pts = self.points().reshape(-1, 3)
        vals = self.values.reshape(-1).astype(complex)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "z", "re", "im"])
            for p, v in zip(pts, vals):
                w.writerow([repr(float(p[0])), repr(float(p[1])), repr(float(p[2])),
                            repr(float(v.real)), repr(float(v.imag))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "FieldGrid":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        pts, vals = data[:, :3], data[:, 3] + 1j * data[:, 4]
        axes = [np.unique(pts[:, k]) for k in range(3)]
        dims = tuple(len(a) for a in axes)
        if np.prod(dims) != len(vals):
            raise ValueError("CSV rows do not form a full rectilinear grid")
        spacing = float(axes[0][1] - axes[0][0])
        origin = np.array([a[0] for a in axes])
        values = vals.reshape(dims)
        if np.all(values.imag == 0):
            values = values.real
        return cls(origin, spacing, dims, values)
