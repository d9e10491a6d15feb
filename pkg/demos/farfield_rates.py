"""How fast the leading far-field term approaches the exact series solution.

For ``eps1 = delta^-alpha`` the difference between the exact backscatter
perturbation and the monopole term is fitted on a log-log scale. With the
ball centred at the expansion point the delta^(4-alpha) term cancels, which
pushes the local slope toward 5 - 2 alpha; displacing the ball restores it.
"""

import numpy as np

from nanoimaging.rates import delta_ladder, electric_farfield_errors, sweep_rate

for alpha in (1 / 3, 1 / 2):
    for offset in ((0.0, 0.0, 0.0), (0.3, 0.2, 0.1)):
        rows = electric_farfield_errors(alpha, delta_ladder(0.1, 6), offset=offset)
        errs = np.array([r[1] for r in rows])
        local = np.log2(errs[:-1] / errs[1:])
        print(f"alpha={alpha:.3f} offset={offset}  fit {sweep_rate(rows).slope:.3f}  "
              f"(4-alpha={4 - alpha:.3f}, 5-2alpha={5 - 2 * alpha:.3f})  local {np.round(local, 2)}")
