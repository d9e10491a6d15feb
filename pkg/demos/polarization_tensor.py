"""Polarization tensor of a sphere by a Nystrom discretisation of the boundary.

The 1280-panel mesh shipped with the package is compared with the closed
form ``3 (mu0 - mu1) / (mu0 + 2 mu1) |B| Id``, and the error is followed over
four refinement levels of the icosphere.
"""

import numpy as np

from nanoimaging.config import bundled
from nanoimaging.surface_potentials import ball_polarization_tensor, icosphere, polarization_tensor, read_off

quad = read_off(bundled("sphere_1280.off")).quadrature()
print(f"mesh: {len(quad)} panels, closure defect {quad.closure_defect:.1e}")
for mu1 in (0.5, 2.0, 10.0, 1e6):
    M = polarization_tensor(quad, 1.0, mu1)
    ref = ball_polarization_tensor(1.0, mu1).matrix[0, 0]
    print(f"mu1={mu1:8g}  M_11={M.matrix[0, 0]:+.5f}  ball {ref:+.5f}  "
          f"rel err {abs(M.matrix[0, 0] - ref) / abs(ref):.2%}  asymmetry {M.asymmetry:.1e}")

print("\nrefinement, mu1 = 2:")
ref = ball_polarization_tensor(1.0, 2.0).matrix
for level in range(4):
    q = icosphere(level).quadrature()
    M = polarization_tensor(q, 1.0, 2.0).matrix
    print(f"  {len(q):5d} panels  rel err {np.linalg.norm(M - ref) / np.linalg.norm(ref):.3%}")
