"""Constructive equilibrium computation for the non-elastic cloud.

Users enter one at a time. The newcomer plays a best reply against the
current equilibrium, after which a prescribed sequence of moves (the update
phase) restores equilibrium:

* case (i): someone on the newcomer's AP now prefers local execution; the
  most reluctant such user leaves and the counts are back to the previous
  equilibrium;
* case (ii): offloaders on other APs want out because the cloud is now
  shared by one more user. The most reluctant of them goes local, then either
  the local user with the highest local cost takes the free slot, or
  offloaders from other APs cascade into the vacated AP one swap at a time.

Reluctance of an offloader is the offloading cost divided by the local cost.
Ties in every argmax are broken by the lowest user or AP index.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import (
    EPS_REL,
    LOCAL,
    GameInstance,
    MobileUser,
    OffloadingError,
    StrategyProfile,
    check_profile,
)

log = logging.getLogger(__name__)

ABSENT = -1
ORDERINGS = ("given", "random", "ratio")


class ContractError(OffloadingError, AssertionError):
    """An input or intermediate state violated the solver's contract."""


def _lt(new, old):
    return new < old - EPS_REL * np.maximum(1.0, np.abs(old))


def worst_case_update_bound(n_users: int, n_aps: int) -> int:
    """Largest number of update steps one arrival can trigger among ``n_users`` users."""
    if n_users < 1 or n_aps < 1:
        raise ValueError("n_users and n_aps must be positive")
    if n_users == 1:
        return 0
    half = (n_users - 1) // 2
    if n_users % 2 == 0:
        return 2 * half + 1 + (n_aps - 1)
    return 2 * (half - 1) + 1 + (n_aps - 1)


class _State:
    """Mutable equilibrium state over a subset of the game's users."""

    def __init__(self, game: GameInstance, debug: bool = True):
        self.game = game
        self.debug = debug
        self.k = game.tx_coeff
        self.t = game.cloud_coeff
        self.L = game.local_costs
        # index 0 is a dummy so that AP a lives at position a
        self.B = np.concatenate(([np.inf], game.bandwidths))
        self.elastic = game.elastic
        self.d = np.full(game.n_users, ABSENT, dtype=np.int64)
        self.counts = np.zeros(game.n_aps + 1, dtype=np.int64)
        self.n = 0
        self.steps = 0
        self.moves: list[tuple[int, int, int]] = []

    # -- costs -----------------------------------------------------------

    def _share(self, n):
        return 1 if self.elastic else n

    def cost_of(self, users: np.ndarray) -> np.ndarray:
        """Current cost of each listed active user."""
        s = self.d[users]
        off = self.k[users] * self.counts[s] / self.B[s] + self.t[users] * self._share(self.n)
        return np.where(s == LOCAL, self.L[users], off)

    def join_cost(self, users: np.ndarray, ap: int) -> np.ndarray:
        """Cost of each listed local user if it alone moved to ``ap``."""
        return self.k[users] * (self.counts[ap] + 1) / self.B[ap] + self.t[users] * self._share(
            self.n + 1
        )

    def members(self, ap: int) -> np.ndarray:
        return np.flatnonzero(self.d == ap)

    def rank1(self, ap: int) -> tuple[int, float]:
        """Most reluctant user on ``ap`` and that reluctance."""
        on = self.members(ap)
        rel = self.cost_of(on) / self.L[on]
        k = int(np.argmax(rel))
        return int(on[k]), float(rel[k])

    # -- deviator sets ---------------------------------------------------

    def stop_offloading_aps(self) -> list[int]:
        """APs with at least one user who strictly prefers local execution."""
        off = np.flatnonzero(self.d > 0)
        if off.size == 0:
            return []
        wants = _lt(self.L[off], self.cost_of(off))
        return sorted(set(int(a) for a in self.d[off[wants]]))

    def start_offloading_user(self, ap: int) -> int | None:
        """Local user with the highest local cost who strictly gains by joining ``ap``."""
        loc = np.flatnonzero(self.d == LOCAL)
        if loc.size == 0:
            return None
        keen = loc[_lt(self.join_cost(loc, ap), self.L[loc])]
        if keen.size == 0:
            return None
        return int(keen[np.argmax(self.L[keen])])

    def swap_donor(self, target: int) -> int | None:
        """AP whose most reluctant user strictly gains by moving to ``target``.

        Among all such APs the one whose most reluctant user has the highest
        reluctance is returned.
        """
        best: tuple[float, int] | None = None
        target_ratio = (self.counts[target] + 1) / self.B[target]
        for b in range(1, self.game.n_aps + 1):
            if b == target or self.counts[b] == 0:
                continue
            # every user on b gains iff the load ratio drops
            if not self.counts[b] / self.B[b] > target_ratio:
                continue
            i, rel = self.rank1(b)
            shared = self.t[i] * self._share(self.n)
            before = self.k[i] * self.counts[b] / self.B[b] + shared
            after = self.k[i] * target_ratio + shared
            if not _lt(after, before):
                continue
            if best is None or rel > best[0]:
                best = (rel, b)
        return None if best is None else best[1]

    # -- moves -----------------------------------------------------------

    def move(self, user: int, new: int) -> None:
        old = int(self.d[user])
        if self.debug:
            before = float(self.cost_of(np.array([user]))[0])
        self._place(user, old, new)
        self.steps += 1
        self.moves.append((user, old, new))
        if self.debug:
            after = float(self.cost_of(np.array([user]))[0])
            if after > before + EPS_REL * max(1.0, before):
                raise ContractError(
                    f"update move of user {user} {old}->{new} raised its cost "
                    f"from {before!r} to {after!r}"
                )

    def _place(self, user: int, old: int, new: int) -> None:
        if old > 0:
            self.counts[old] -= 1
            self.n -= 1
        if new > 0:
            self.counts[new] += 1
            self.n += 1
        self.d[user] = new

    def arrive(self, user: int) -> int:
        """Best reply of a newcomer against the current state; not an update step."""
        self.d[user] = LOCAL
        costs = [float(self.L[user])]
        for a in range(1, self.game.n_aps + 1):
            costs.append(float(self.join_cost(np.array([user]), a)[0]))
        best = min(costs)
        # ties: local first, then lowest AP index
        choice = next(s for s, c in enumerate(costs) if not _lt(best, c))
        self._place(user, LOCAL, choice)
        return choice

    def leave(self, user: int) -> int:
        old = int(self.d[user])
        self._place(user, old, LOCAL)
        self.d[user] = ABSENT
        return old

    # -- update phase ----------------------------------------------------

    def _swap_potential(self) -> float:
        c = self.counts[1:]
        return float(np.sum(c * (c + 1) / 2 / self.B[1:]))

    def cascade_into(self, target: int) -> None:
        while (donor := self.swap_donor(target)) is not None:
            mover, _ = self.rank1(donor)
            if self.debug:
                before = self._swap_potential()
            self.move(mover, target)
            if self.debug and not self._swap_potential() < before:
                raise ContractError(f"swap of user {mover} did not lower the load potential")
            target = donor

    def refill(self, vacated: int, leaver_reluctance: float | None = None) -> None:
        """After someone left ``vacated``: a local takes the slot or offloaders swap in."""
        newcomer = self.start_offloading_user(vacated)
        if newcomer is not None:
            self.move(newcomer, vacated)
            if self.debug and leaver_reluctance is not None:
                rel = float(self.cost_of(np.array([newcomer]))[0] / self.L[newcomer])
                if not rel < leaver_reluctance:
                    raise ContractError(
                        f"user {newcomer} replaced a user of reluctance {leaver_reluctance!r} "
                        f"with reluctance {rel!r}"
                    )
        else:
            self.cascade_into(vacated)

    def exit_loop(self) -> None:
        while aps := self.stop_offloading_aps():
            rels = [self.rank1(a) for a in aps]
            k = max(range(len(aps)), key=lambda j: (rels[j][1], -aps[j]))
            leaver, rel = rels[k]
            self.move(leaver, LOCAL)
            self.refill(aps[k], rel)

    def update_phase(self, ap: int) -> None:
        """Restore equilibrium after a user started offloading through ``ap``."""
        aps = self.stop_offloading_aps()
        if not aps:
            return
        if ap in aps:
            leaver, _ = self.rank1(ap)
            self.move(leaver, LOCAL)
            return
        self.exit_loop()

    # -- verification ----------------------------------------------------

    def profile(self) -> StrategyProfile:
        return tuple(int(s) for s in self.d)

    def violations(self) -> list[tuple[int, int]]:
        """(user, better strategy) pairs among active users; empty at an equilibrium."""
        act = np.flatnonzero(self.d != ABSENT)
        if act.size == 0:
            return []
        cur = self.cost_of(act)
        s = self.d[act]
        aps = np.arange(1, self.game.n_aps + 1)
        counts_wo = self.counts[None, 1:] - (s[:, None] == aps[None, :])
        n_wo = self.n - (s > 0)
        share = 1 if self.elastic else (n_wo + 1)[:, None]
        alt = self.k[act, None] * (counts_wo + 1) / self.B[None, 1:] + self.t[act, None] * share
        alt = np.concatenate((self.L[act, None], alt), axis=1)
        better = _lt(alt, cur[:, None])
        better[np.arange(act.size), s] = False
        rows, cols = np.nonzero(better)
        return [(int(act[r]), int(c)) for r, c in zip(rows, cols)]

    def check(self, what: str) -> None:
        bad = self.violations()
        if bad:
            raise ContractError(f"{what}: not an equilibrium, e.g. user {bad[0][0]} -> {bad[0][1]}")


@dataclass(frozen=True)
class InductionStep:
    user: int
    updates: int
    bound: int
    profile: StrategyProfile  # ABSENT (-1) for users not yet added


@dataclass
class InductionReport:
    order: tuple[int, ...]
    per_step: list[InductionStep] = field(default_factory=list)
    total_updates: int = 0
    profile: StrategyProfile = ()

    @property
    def bound_violations(self) -> list[InductionStep]:
        return [s for s in self.per_step if s.updates > s.bound]


def entry_order(
    game: GameInstance, ordering: str = "given", seed: int | None = None
) -> tuple[int, ...]:
    n = game.n_users
    if ordering == "given":
        return tuple(range(n))
    if ordering == "random":
        return tuple(int(i) for i in np.random.default_rng(seed).permutation(n))
    if ordering == "ratio":
        ratio = [u.data_bits / (game.local_costs[i] * u.cycles) for i, u in enumerate(game.users)]
        return tuple(sorted(range(n), key=lambda i: (ratio[i], i)))
    raise ValueError(f"unknown ordering {ordering!r}; expected one of {ORDERINGS}")


def solve(
    game: GameInstance,
    ordering: str = "given",
    seed: int | None = None,
    debug: bool = True,
) -> tuple[StrategyProfile, InductionReport]:
    """Equilibrium of the game by adding users one at a time.

    ``ordering`` is ``given`` (index order), ``random`` (permutation drawn
    from ``seed``) or ``ratio`` (ascending ``d_i / (L_i c_i)``). With
    ``debug`` every intermediate state is checked to be an equilibrium of
    the users added so far.
    """
    order = entry_order(game, ordering, seed)
    state = _State(game, debug=debug)
    report = InductionReport(order=order)
    for t, user in enumerate(order, start=1):
        before = state.steps
        ap = state.arrive(user)
        if ap != LOCAL:
            state.update_phase(ap)
        if debug:
            state.check(f"after adding user {user}")
        updates = state.steps - before
        bound = worst_case_update_bound(t, game.n_aps)
        if updates > bound:
            log.warning(
                "arrival %d (user %d) needed %d update steps, bound is %d", t, user, updates, bound
            )
        report.per_step.append(InductionStep(user, updates, bound, state.profile()))
    report.total_updates = state.steps
    report.profile = state.profile()
    return report.profile, report


def _state_from(game: GameInstance, profile: Sequence[int], debug: bool) -> _State:
    state = _State(game, debug=debug)
    for i, s in enumerate(profile):
        state.d[i] = LOCAL
        state._place(i, LOCAL, s)
    if debug:
        state.check("input profile")
    return state


def add_player(
    game: GameInstance, profile: Sequence[int], user: MobileUser, debug: bool = True
) -> tuple[StrategyProfile, int]:
    """Equilibrium after ``user`` joins a game currently at equilibrium ``profile``.

    The newcomer is appended as the last user. Returns the new profile and
    the number of update steps (the newcomer's own entry is not counted).
    """
    prof = check_profile(game, profile)
    bigger = game.with_user(user)
    state = _state_from(game, prof, debug)
    grown = _State(bigger, debug=debug)
    grown.d[:-1] = state.d
    grown.counts[:] = state.counts
    grown.n = state.n
    ap = grown.arrive(bigger.n_users - 1)
    if ap != LOCAL:
        grown.update_phase(ap)
    if debug:
        grown.check("after arrival")
    return grown.profile(), grown.steps


def remove_player(
    game: GameInstance, profile: Sequence[int], user: int, debug: bool = True
) -> tuple[StrategyProfile, int]:
    """Equilibrium of the remaining users after ``user`` leaves.

    A departing local user changes nothing. A departing offloader frees a
    slot on its AP, which is refilled like a vacancy in the update phase.
    Because the cloud now has one user fewer, locals may still want to start
    offloading afterwards; each one (highest local cost first) is then
    treated as a newcomer and followed by an update phase.
    """
    prof = check_profile(game, profile)
    if not 0 <= user < game.n_users:
        raise ValueError(f"unknown user {user}")
    state = _state_from(game, prof, debug)
    old = state.leave(user)
    if old != LOCAL:
        state.refill(old)
        state.exit_loop()
        cap = 4 * game.n_users * (game.n_aps + 1)
        for _ in range(cap):
            entrant = _keenest_local(state)
            if entrant is None:
                break
            j, ap = entrant
            state.move(j, ap)
            state.update_phase(ap)
        else:
            raise ContractError("departure update did not settle")
    if debug:
        state.check("after departure")
    rest = tuple(int(s) for k, s in enumerate(state.d) if k != user)
    return rest, state.steps


def _keenest_local(state: _State) -> tuple[int, int] | None:
    """Local user with the highest local cost who gains by offloading, and its best AP."""
    loc = np.flatnonzero(state.d == LOCAL)
    best: tuple[int, int] | None = None
    for j in sorted(loc, key=lambda j: (-state.L[j], j)):
        costs = [state.join_cost(np.array([j]), a)[0] for a in range(1, state.game.n_aps + 1)]
        a = 1 + int(np.argmin(costs))
        if _lt(costs[a - 1], state.L[j]):
            best = (int(j), a)
            break
    return best
