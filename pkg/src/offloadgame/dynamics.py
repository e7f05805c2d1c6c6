"""Best replies, the elastic-cloud potential and improvement paths."""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Sequence

from .model import (
    LOCAL,
    AccessPoint,
    Cloud,
    CloudModel,
    GameInstance,
    MobileUser,
    StrategyProfile,
    WrongModelError,
    check_profile,
    congestion_counts,
    deviation_costs,
    is_nash,
    strictly_less,
    tolerance,
    user_cost,
)

POLICIES = ("round_robin", "best", "random")


def _require_elastic(game: GameInstance) -> None:
    if not game.elastic:
        raise WrongModelError("defined for the elastic cloud model only")


def threshold(game: GameInstance, user: int) -> float:
    """Load ratio ``n_a / B_a`` above which local execution beats offloading."""
    _require_elastic(game)
    u = game.users[user]
    numer = u.weight_energy * u.energy_per_cycle + u.weight_time * (
        1.0 / u.local_speed - 1.0 / game.cloud.capability
    )
    denom = u.weight_time + u.weight_energy * u.tx_power
    return numer / denom * (u.cycles / u.data_bits)


def _pick(costs: Sequence[float], current: int) -> int:
    """Argmin with ties (within slack) broken: current, then local, then lowest AP."""
    best = min(costs)
    ties = [s for s, c in enumerate(costs) if not strictly_less(best, c)]
    if current in ties:
        return current
    return ties[0]


def _threshold_reply(game: GameInstance, user: int, prof: StrategyProfile) -> int:
    t_i = threshold(game, user)
    cur = prof[user]
    if t_i <= 0:
        return LOCAL
    per_ap, _ = congestion_counts(game, prof)
    # load ratio each AP would have with the user on it
    ratios = [0.0] * (game.n_aps + 1)
    ratios[LOCAL] = t_i
    for a in range(1, game.n_aps + 1):
        ratios[a] = (per_ap[a - 1] - (cur == a) + 1) / game.aps[a - 1].bandwidth
    # cost differences are tx_coeff * ratio differences; map the cost slack
    scale = game.tx_coeff[user]
    slack = tolerance(game.local_costs[user]) / scale
    best = min(ratios)
    ties = [s for s, r in enumerate(ratios) if not r - slack > best]
    if cur in ties:
        return cur
    return ties[0]


def best_reply(game: GameInstance, user: int, profile: Sequence[int]) -> int:
    """A cost-minimising strategy for ``user`` against the others' strategies.

    Elastic games use the threshold rule; non-elastic games compare all
    ``A + 1`` candidate costs.
    """
    prof = check_profile(game, profile)
    if game.elastic:
        return _threshold_reply(game, user, prof)
    return _pick(deviation_costs(game, user, prof), prof[user])


def exhaustive_best_reply(game: GameInstance, user: int, profile: Sequence[int]) -> int:
    """Same tie-breaking as :func:`best_reply`, always by direct cost comparison."""
    prof = check_profile(game, profile)
    return _pick(deviation_costs(game, user, prof), prof[user])


def potential(game: GameInstance, profile: Sequence[int]) -> float:
    """Generalized ordinal potential of the elastic game."""
    _require_elastic(game)
    prof = check_profile(game, profile)
    per_ap, _ = congestion_counts(game, prof)
    phi = 0.0
    for a, n_a in enumerate(per_ap):
        phi += n_a * (n_a + 1) / 2 / game.aps[a].bandwidth
    for i, s in enumerate(prof):
        if s == LOCAL:
            phi += threshold(game, i)
    return phi


def swap_potential(game: GameInstance, profile: Sequence[int]) -> float:
    """``sum_a n_a (n_a + 1) / (2 B_a)``; drops on every improving AP-to-AP move.

    With the set of offloaders fixed, a move from ``a`` to ``b`` improves the
    mover iff ``(n_b + 1) / B_b < n_a / B_a``, which is exactly the change in
    this sum.
    """
    per_ap, _ = congestion_counts(game, profile)
    return sum(n * (n + 1) / 2 / ap.bandwidth for n, ap in zip(per_ap, game.aps))


def sorted_offloader_costs(game: GameInstance, profile: Sequence[int]) -> tuple[float, ...]:
    prof = check_profile(game, profile)
    costs = [user_cost(game, i, prof).total for i, s in enumerate(prof) if s != LOCAL]
    return tuple(sorted(costs, reverse=True))


def lex_smaller(a: Sequence[float], b: Sequence[float]) -> bool:
    """Strict lexicographic comparison with the global comparison slack per entry."""
    for x, y in zip(a, b):
        if strictly_less(x, y):
            return True
        if strictly_less(y, x):
            return False
    return len(a) < len(b)


class Terminal(str, enum.Enum):
    EQUILIBRIUM = "equilibrium"
    CYCLE = "cycle"
    STEP_CAP = "step_cap"
    SCHEDULE_EXHAUSTED = "schedule_exhausted"


@dataclass(frozen=True)
class Step:
    user: int
    old: int
    new: int
    old_cost: float
    new_cost: float
    potential_before: float | None = None
    potential_after: float | None = None


@dataclass
class ImprovementTrace:
    steps: list[Step] = field(default_factory=list)
    terminal: Terminal | None = None
    cycle_period: int | None = None

    def __len__(self) -> int:
        return len(self.steps)


def default_step_cap(game: GameInstance) -> int:
    return 50 * game.n_users * (game.n_aps + 1)


def _choose_move(
    game: GameInstance,
    prof: StrategyProfile,
    policy: str,
    rng: random.Random | None,
    start: int,
) -> tuple[int, int] | None:
    n = game.n_users
    counts = congestion_counts(game, prof)
    if policy == "round_robin":
        for k in range(n):
            i = (start + k) % n
            costs = deviation_costs(game, i, prof, counts)
            if any(strictly_less(c, costs[prof[i]]) for c in costs):
                s = best_reply(game, i, prof)
                # threshold rule and cost slack can disagree on razor-thin ties
                return i, s if s != prof[i] else _pick(costs, prof[i])
        return None
    if policy == "best":
        best: tuple[float, int, int] | None = None
        for i in range(n):
            costs = deviation_costs(game, i, prof, counts)
            s = best_reply(game, i, prof)
            if s == prof[i]:
                s = _pick(costs, prof[i])
            gain = costs[prof[i]] - costs[s]
            if s != prof[i] and (best is None or gain > best[0]):
                best = (gain, i, s)
        return None if best is None else (best[1], best[2])
    if policy == "random":
        options = []
        for i in range(n):
            costs = deviation_costs(game, i, prof, counts)
            options.extend(
                (i, s) for s, c in enumerate(costs) if strictly_less(c, costs[prof[i]])
            )
        return rng.choice(options) if options else None
    raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")


def run_improvement_path(
    game: GameInstance,
    initial: Sequence[int] | None = None,
    policy: str = "round_robin",
    step_cap: int | None = None,
    seed: int | None = None,
    schedule: Sequence[tuple[int, int]] | None = None,
    memory_cap: int = 1_000_000,
) -> tuple[StrategyProfile, ImprovementTrace]:
    """Let one user at a time make an improvement step until nobody wants to.

    Policies: ``round_robin`` scans users cyclically from the last mover and
    moves the first one with an improving deviation to their best reply;
    ``best`` moves the user with the largest gain to their best reply;
    ``random`` draws a uniformly random improving (user, strategy) pair.
    ``schedule`` overrides the policy with explicit ``(user, new strategy)``
    moves, each of which must be an improvement step.

    A revisited profile ends the run with ``Terminal.CYCLE``; visited profiles
    are remembered up to ``memory_cap`` entries.
    """
    if step_cap is None:
        step_cap = default_step_cap(game)
    if step_cap <= 0:
        raise ValueError(f"step_cap must be positive, got {step_cap}")
    prof = check_profile(game, initial if initial is not None else (LOCAL,) * game.n_users)
    rng = random.Random(seed) if policy == "random" else None
    trace = ImprovementTrace()
    seen: dict[StrategyProfile, int] = {prof: 0}
    track_phi = game.elastic
    phi = potential(game, prof) if track_phi else None
    next_start = 0

    for step_no in range(1, step_cap + 1):
        if schedule is not None:
            if step_no > len(schedule):
                trace.terminal = (
                    Terminal.EQUILIBRIUM if is_nash(game, prof) else Terminal.SCHEDULE_EXHAUSTED
                )
                return prof, trace
            i, s = schedule[step_no - 1]
            costs = deviation_costs(game, i, prof)
            if not strictly_less(costs[s], costs[prof[i]]):
                raise ValueError(
                    f"scheduled move {step_no} (user {i} -> {s}) is not an improvement step"
                )
            move = (i, s)
        else:
            move = _choose_move(game, prof, policy, rng, next_start)
            if move is None:
                trace.terminal = Terminal.EQUILIBRIUM
                return prof, trace
        i, s = move
        costs = deviation_costs(game, i, prof)
        new = prof[:i] + (s,) + prof[i + 1 :]
        new_phi = potential(game, new) if track_phi else None
        trace.steps.append(Step(i, prof[i], s, costs[prof[i]], costs[s], phi, new_phi))
        prof, phi = new, new_phi
        next_start = (i + 1) % game.n_users
        if prof in seen:
            trace.terminal = Terminal.CYCLE
            trace.cycle_period = step_no - seen[prof]
            return prof, trace
        if len(seen) < memory_cap:
            seen[prof] = step_no

    trace.terminal = Terminal.EQUILIBRIUM if is_nash(game, prof) else Terminal.STEP_CAP
    return prof, trace


def run_swap_dynamics(
    game: GameInstance, initial: Sequence[int], step_cap: int = 10_000
) -> tuple[StrategyProfile, list[tuple[float, ...]]]:
    """Improvement path where offloaders may only switch APs and locals stay put.

    Returns the final profile and the sorted offloader cost vector after every
    step (first entry is the starting vector).
    """
    prof = check_profile(game, initial)
    history = [sorted_offloader_costs(game, prof)]
    for _ in range(step_cap):
        counts = congestion_counts(game, prof)
        move = None
        for i, cur in enumerate(prof):
            if cur == LOCAL:
                continue
            costs = deviation_costs(game, i, prof, counts)
            aps = costs[1:]
            target = 1 + min(range(len(aps)), key=lambda k: (aps[k], k))
            if target != cur and strictly_less(costs[target], costs[cur]):
                move = (i, target)
                break
        if move is None:
            return prof, history
        i, s = move
        prof = prof[:i] + (s,) + prof[i + 1 :]
        history.append(sorted_offloader_costs(game, prof))
    raise RuntimeError("swap dynamics exceeded the step cap")


# ---------------------------------------------------------------------------
# Cyclic improvement path in a non-elastic game with 5 users and 3 APs.

CYCLE_USER_NAMES = ("a", "b", "c", "d", "e")

CYCLE_PROFILES: tuple[StrategyProfile, ...] = (
    (1, 2, 1, 0, 0),
    (1, 2, 2, 0, 0),
    (1, 0, 2, 0, 0),
    (1, 0, 2, 2, 0),
    (1, 0, 2, 2, 2),
    (1, 0, 1, 2, 2),
    (1, 3, 1, 2, 2),
    (1, 3, 1, 2, 0),
    (1, 3, 1, 0, 0),
    (1, 2, 1, 0, 0),
)


@dataclass(frozen=True)
class CycleFixture:
    game: GameInstance
    initial: StrategyProfile
    schedule: tuple[tuple[int, int], ...]

    @property
    def movers(self) -> tuple[str, ...]:
        return tuple(CYCLE_USER_NAMES[i] for i, _ in self.schedule)


def build_cycle_instance() -> CycleFixture:
    """Concrete instance on which better-response play cycles after 9 steps.

    Bandwidths 5, 6 and 4 Mb/s satisfy ``B2 > B1 > 2/3 B2`` and
    ``B2 > B3 > 1/2 B2``. Users weigh time only, so their offloading cost is
    ``d n_a / B_a + c n / f_c`` and local cost ``c / f``. With f_c = 10 GHz:

    ======  =========  =========  ==========  ===========
    user    d (Mb)     c (Gcyc)   f (GHz)     local cost
    ======  =========  =========  ==========  ===========
    b       1.2        0.2        0.45        0.444
    d       0.6        1.5        2.25        0.667
    e       0.6        1.5        1.6         0.9375
    ======  =========  =========  ==========  ===========

    Users a and c only ever move between APs (c) or stay on AP 1 (a), so
    their parameters do not matter for the cycle.
    """
    users = (
        MobileUser(data_bits=1.0e6, cycles=1.0e9, local_speed=0.5e9),  # a
        MobileUser(data_bits=1.2e6, cycles=0.2e9, local_speed=0.45e9),  # b
        MobileUser(data_bits=1.0e6, cycles=1.0e9, local_speed=0.5e9),  # c
        MobileUser(data_bits=0.6e6, cycles=1.5e9, local_speed=2.25e9),  # d
        MobileUser(data_bits=0.6e6, cycles=1.5e9, local_speed=1.6e9),  # e
    )
    aps = (AccessPoint(5e6), AccessPoint(6e6), AccessPoint(4e6))
    game = GameInstance(users, aps, CloudModel(Cloud.NONELASTIC, 10e9))
    schedule = []
    for before, after in zip(CYCLE_PROFILES, CYCLE_PROFILES[1:]):
        (i,) = [k for k in range(5) if before[k] != after[k]]
        schedule.append((i, after[i]))
    return CycleFixture(game, CYCLE_PROFILES[0], tuple(schedule))
