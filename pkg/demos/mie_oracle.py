"""Scattering by a small penetrable ball, solved exactly by the series method.

Shows the far-field pattern, checks energy conservation through the optical
theorem and compares the backscatter value with the monopole limit
``c_ff w^2 mu0 (eps1 - eps0) delta^3 |B|``.
"""

import math

import numpy as np

from nanoimaging.mie import farfield_constant, mie_far_field, mie_monopole_limit, solve_mie
from nanoimaging.scenario import Medium, ParticleSpec

medium = Medium(omega=1.0)
d = np.array([0.0, 0.0, 1.0])

for delta in (0.1, 0.03, 0.01):
    spec = ParticleSpec(delta, np.zeros(3), delta ** -0.5, 1.0)
    coeffs = solve_mie(spec, medium)

    # optical theorem: extinction from Im u_inf(d, d) equals the scattered power
    t, w = np.polynomial.legendre.leggauss(200)
    xh = np.stack([np.sqrt(1 - t ** 2), np.zeros_like(t), t], axis=-1)
    power = 2 * math.pi * np.sum(w * np.abs(mie_far_field(coeffs, xh, d)) ** 2)
    lhs = medium.kappa0 / (4 * math.pi) * power
    rhs = mie_far_field(coeffs, d, d).imag

    back = mie_far_field(coeffs, -d, d)
    mono = farfield_constant() * (spec.eps1 - 1.0) * spec.volume
    print(f"delta={delta:5.3f}  n_max={coeffs.n_max:2d}  backscatter={complex(back):.4e}  "
          f"monopole={mono:.4e}  optical theorem residual={abs(lhs - rhs) / abs(rhs):.1e}")

# lim u_inf / delta^3 for eps1 - eps0 = 1, divided by |B|, fixes the constant c_ff
spec = ParticleSpec(1e-3, np.zeros(3), 2.0, 1.0)
limit = mie_monopole_limit(spec, medium) / spec.body.volume
print(f"\nmonopole limit / |B| = {limit.real:.10f}   1/(4 pi) = {1 / (4 * math.pi):.10f}")
