"""Background field of a Gaussian permittivity bump.

Solves the volume integral equation, writes the field as CSV, evaluates the
backscatter far field and verifies that the far field of the Green's
function matches the total field after multiplying by ``c_mr = 4 pi``.
"""

import tempfile
from pathlib import Path

import numpy as np

from nanoimaging.background import (background_farfield, gaussian_bump, ls_solve, mixed_reciprocity_check,
                                    mixed_reciprocity_constant, volume_operator)
from nanoimaging.grid import FieldGrid
from nanoimaging.scenario import Medium

d = np.array([0.0, 0.0, 1.0])
eps = gaussian_bump(24, 1 / 23, 0.2, 0.12)
medium = Medium(omega=3.0, eps0_field=eps)

U, info = ls_solve(medium, d, return_info=True)
op = volume_operator(medium)
print(f"{op.n_support} unknowns, {info.iterations} Krylov steps, residual {info.residual:.1e}")
print(f"|U^t| ranges over [{np.abs(U.values).min():.4f}, {np.abs(U.values).max():.4f}]")
print(f"U_inf(-d, d) = {complex(background_farfield(medium, U, -d)):.4e}")

out = Path(tempfile.mkdtemp()) / "U_total.csv"
U.to_csv(out)
back = FieldGrid.from_csv(out)
print(f"CSV round trip exact: {np.array_equal(back.values, U.values)}  ({out})")

print(f"\nc_mr from the homogeneous case: {mixed_reciprocity_constant().real:.8f}")
for z in ([0.0, 0.0, 0.0], [0.1, -0.05, 0.08]):
    print(f"mixed reciprocity deviation at z={z}: {mixed_reciprocity_check(medium, z, [0.6, 0.0, -0.8]):.1e}")
