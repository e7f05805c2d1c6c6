"""
Update steps of the arrival-by-arrival solver
=============================================

Users join one at a time; each arrival may push others to switch. Here we
count those switches for random and for sorted arrival orders.
"""

from offloadgame import ScenarioConfig, run_batch

res = run_batch(
    ScenarioConfig(), [20, 60, 100], [10], clouds=["nonelastic"], repetitions=30,
    master_seed=3, with_optimum=False,
)
for agg in res.aggregates():
    print(f"N={agg.n_users:>3} {agg.ordering:>6}: updates {agg.means['iterations']:6.2f} "
          f"+- {agg.half_widths['iterations']:.2f}, arrivals plus updates {agg.means['entries']:.1f}")

# sorted arrivals need far fewer switches, though every run adds N arrivals
