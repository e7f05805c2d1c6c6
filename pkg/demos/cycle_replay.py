"""
A better-response cycle under a non-elastic cloud
=================================================

Five users, three access points, and a cloud whose speed is split among
everyone who offloads. Nine strictly improving moves lead back to the
starting profile, so improvement dynamics alone cannot be trusted to stop.
"""

from offloadgame import build_cycle_instance, is_nash, run_improvement_path, solve, user_cost
from offloadgame.dynamics import CYCLE_PROFILES, CYCLE_USER_NAMES

fx = build_cycle_instance()
game = fx.game
print("bandwidths (Hz):", [ap.bandwidth for ap in game.aps])

# walk the schedule by hand and watch each mover's cost fall
prof = fx.initial
print(f"start {prof}")
for (i, s), nxt in zip(fx.schedule, CYCLE_PROFILES[1:]):
    before = user_cost(game, i, prof).total
    prof = prof[:i] + (s,) + prof[i + 1 :]
    after = user_cost(game, i, prof).total
    assert prof == nxt
    print(f"  {CYCLE_USER_NAMES[i]} -> {s}: {before:.4f} -> {after:.4f}   now {prof}")

# the path runner notices the repeat
_, trace = run_improvement_path(game, fx.initial, schedule=fx.schedule)
print("terminal:", trace.terminal.value, "period:", trace.cycle_period)

# none of the visited profiles is an equilibrium, yet one exists
print("any visited profile stable:", any(is_nash(game, p) for p in CYCLE_PROFILES))
stable, _ = solve(game, "ratio")
print("arrival-by-arrival solver finds", stable, "stable:", bool(is_nash(game, stable)))
