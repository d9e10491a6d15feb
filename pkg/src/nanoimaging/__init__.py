"""Forward fields and background-permittivity reconstruction with injected nanoparticles."""

from .asymptotics import (FarFieldSample, MeasurementPlan, NearFieldSample, SynthesisMode, SyntheticDataset,
                          farfield_perturbation, nearfield_perturbation, synthesize)
from .background import (GreensEval, GreensFunction, background_farfield, greens_function, ls_solve,
                         mixed_reciprocity_check)
from .grid import FieldGrid
from .inversion import (ReconstructionResult, branch_sqrt, discrete_laplacian, recover_A_magnetic,
                        recover_B_magnetic, recover_eps0_electric, recover_gradU_magnetic,
                        recover_Usq_electric, run_electric_pipeline, run_magnetic_pipeline,
                        solve_eps0_quadratic)
from .mie import farfield_constant, mie_far_field, mie_monopole_limit, mie_near_field, solve_mie
from .rates import RateFit, fit_rate
from .scenario import (Medium, ParticleClass, ParticleKind, ParticleSpec, ReferenceBody, Scenario,
                       Wavenumbers, classify_particle, wavenumbers)
from .specfun import legendre_p, spherical_bessel_j, spherical_bessel_table, spherical_hankel_h1
from .surface_potentials import (PolarizationTensor, assemble_Kstar0, assemble_S0, icosphere,
                                 polarization_tensor)
