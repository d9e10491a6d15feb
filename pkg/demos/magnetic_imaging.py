"""Imaging with magnetic nanoparticles.

Near fields at two radii in three directions give ``grad U^t``, the
backscatter perturbation gives ``A = (eps1 - eps0) U^2``, the divergence of
the gradient gives ``B = eps0 U`` and ``eps0`` is the positive root of a
quadratic. Also shows the gradient error shrinking like
``delta^min(alpha, 1 - alpha)`` when the data carry remainder terms.
"""

import warnings

import numpy as np

from nanoimaging import config
from nanoimaging.asymptotics import MeasurementPlan, synthesize
from nanoimaging.background import gaussian_bump
from nanoimaging.grid import FieldGrid
from nanoimaging.inversion import recover_gradU_magnetic, run_magnetic_pipeline
from nanoimaging.rates import fit_rate
from nanoimaging.scenario import Medium, ParticleClass, ParticleKind, ParticleSpec, Scenario

warnings.simplefilter("ignore")

cfg = config.load(config.bundled("magnetic_homogeneous.json"))
scenario = config.build_scenario(cfg)
data = synthesize(scenario, config.build_z_grid(cfg, scenario.medium), config.build_plan(cfg),
                  mode=cfg["synthesis"]["mode"])
res = run_magnetic_pipeline(data, scenario)
print(f"homogeneous background: rel error {res.error_against(1.0):.3%}, "
      f"max |Im A/B^2| {res.diagnostics['max_imag_ratio']:.1e}")

eps = gaussian_bump(17, 0.025, 0.2, 0.1)
medium = Medium(omega=2.0, eps0_field=eps)
sc = Scenario(medium, ParticleSpec(1e-4, np.zeros(3), 2.0, 1e2), [0.0, 0.0, 1.0],
              declared_class=ParticleClass(ParticleKind.MAGNETIC, 0.5, 0.5))
data = synthesize(sc, eps.with_values(np.zeros(eps.dims)), MeasurementPlan.axis_aligned())
print(f"Gaussian bump on 17^3: rel error {run_magnetic_pipeline(data, sc).error_against(eps):.3%}")

print("\ngradient error order with remainder terms in the data:")
m = Medium(omega=1.0)
z0 = np.array([0.1, -0.2, 0.3])
zg = FieldGrid(z0, 0.1, (2, 2, 2), np.zeros((2, 2, 2)))
true = 1j * np.exp(1j * z0[2]) * np.array([0.0, 0.0, 1.0])
for alpha in (1 / 3, 1 / 2, 2 / 3):
    pts = []
    for delta in 1e-3 * 4.0 ** -np.arange(5):
        s = Scenario(m, ParticleSpec(delta, np.zeros(3), 2.0, delta ** -alpha), [0.0, 0.0, 1.0],
                     declared_class=ParticleClass(ParticleKind.MAGNETIC, alpha, alpha))
        ds = synthesize(s, zg, MeasurementPlan.axis_aligned(), mode="AsymptoticWithRemainder")
        got = recover_gradU_magnetic(ds.near_for(z0), s.particle.at(z0), m)
        pts.append((delta, np.max(np.abs(got - true))))
    print(f"  alpha={alpha:.3f}: slope {fit_rate(pts).slope:.3f}  (min(alpha, 1-alpha) = {min(alpha, 1 - alpha):.3f})")
