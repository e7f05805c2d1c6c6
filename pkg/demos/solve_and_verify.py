"""
Solving one scenario under both cloud models
============================================

Draw a random scenario, reach an equilibrium with improvement dynamics
(elastic cloud) and with the arrival-by-arrival solver (shared cloud), then
check both answers against every unilateral deviation.
"""

from offloadgame import ScenarioConfig, generate, is_nash, solve_equilibrium, total_cost

cfg = ScenarioConfig(n_users=30, n_aps=5, seed=7)

for cloud in ("elastic", "nonelastic"):
    game = generate(ScenarioConfig(**{**cfg.to_dict(), "cloud": cloud}))
    report = solve_equilibrium(game, ordering="ratio")
    offloaders = sum(1 for s in report.profile if s)
    print(f"{cloud:>10}: solver={report.solver} iterations={report.iterations} "
          f"offloaders={offloaders}/{game.n_users} cost={report.total_cost:.4f}")
    print(" " * 12, "verified:", bool(is_nash(game, report.profile)))

    # compare with everyone staying local
    print(" " * 12, f"all-local cost={total_cost(game, (0,) * game.n_users):.4f}")
