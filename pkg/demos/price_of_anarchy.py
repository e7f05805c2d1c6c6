"""
How bad can selfish offloading get?
===================================

For small games every profile can be enumerated. We compare the worst
equilibrium with the social optimum and with the closed-form upper bound.
"""

import numpy as np

from offloadgame import ScenarioConfig, generate, poa_report
from offloadgame.scenario import derive_seed

for n in (3, 5, 7):
    ratios, bounds = [], []
    for rep in range(30):
        game = generate(ScenarioConfig(n_users=n, n_aps=3, cloud="nonelastic", seed=derive_seed(1, n, 3, rep)))
        r = poa_report(game)
        ratios.append(r.empirical_poa)
        bounds.append(r.poa_upper_bound)
    print(f"N={n}: worst NE / optimum mean {np.mean(ratios):.4f} (max {np.max(ratios):.4f}), "
          f"bound mean {np.mean(bounds):.3f}")

# the gap between the two columns is the looseness of the bound
