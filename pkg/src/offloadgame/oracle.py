"""Ground truth by exhaustive search, and the analytic price-of-anarchy bound.

Profiles are enumerated in mixed-radix order with user 0 as the most
significant digit, so profile index order equals lexicographic order. The
enumeration is vectorised over chunks of profile indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .model import EPS_REL, GameInstance, OffloadingError, StrategyProfile, total_cost

DEFAULT_ENUM_CAP = 2**24
CHUNK = 1 << 16


class InstanceTooLargeError(OffloadingError):
    pass


def _check_cap(game: GameInstance, cap: int) -> int:
    size = (game.n_aps + 1) ** game.n_users
    if size > cap:
        raise InstanceTooLargeError(
            f"{size} profiles ((A+1)^N with N={game.n_users}, A={game.n_aps}) exceed the cap {cap}"
        )
    return size


def _chunks(game: GameInstance, size: int) -> Iterator[tuple[int, np.ndarray]]:
    radix = game.n_aps + 1
    n = game.n_users
    weights = radix ** np.arange(n - 1, -1, -1, dtype=np.int64)
    for start in range(0, size, CHUNK):
        idx = np.arange(start, min(start + CHUNK, size), dtype=np.int64)
        yield start, (idx[:, None] // weights[None, :]) % radix


def _evaluate(game: GameInstance, prof: np.ndarray, with_nash: bool):
    """Per-user costs of every profile row, plus an equilibrium mask if asked."""
    P, N = prof.shape
    A = game.n_aps
    k, t, L = game.tx_coeff, game.cloud_coeff, game.local_costs
    B = np.concatenate(([np.inf], game.bandwidths))
    counts = np.zeros((P, A + 1), dtype=np.int64)
    for a in range(1, A + 1):
        counts[:, a] = (prof == a).sum(axis=1)
    n = counts[:, 1:].sum(axis=1)
    share = np.ones(P) if game.elastic else n.astype(float)
    rows = np.arange(P)
    cost = np.empty((P, N))
    for i in range(N):
        s = prof[:, i]
        off = k[i] * counts[rows, s] / B[s] + t[i] * share
        cost[:, i] = np.where(s == 0, L[i], off)
    if not with_nash:
        return cost, None, n
    stable = np.ones(P, dtype=bool)
    for i in range(N):
        s = prof[:, i]
        cur = cost[:, i]
        slack = cur - EPS_REL * np.maximum(1.0, np.abs(cur))
        is_off = s != 0
        stable &= ~(is_off & (L[i] < slack))
        n_dev = n + (~is_off)
        dev_share = np.ones(P) if game.elastic else n_dev.astype(float)
        for a in range(1, A + 1):
            dev = k[i] * (counts[:, a] + (s != a)) / B[a] + t[i] * dev_share
            stable &= ~((s != a) & (dev < slack))
    return cost, stable, n


def brute_force_optimal(
    game: GameInstance, cap: int = DEFAULT_ENUM_CAP
) -> tuple[StrategyProfile, float]:
    """Minimum total cost over all profiles; exact ties go to the lexicographically smallest."""
    size = _check_cap(game, cap)
    best_cost = np.inf
    best: StrategyProfile = ()
    for _, prof in _chunks(game, size):
        cost, _, _ = _evaluate(game, prof, with_nash=False)
        totals = cost.sum(axis=1)
        j = int(np.argmin(totals))
        if totals[j] < best_cost:
            best_cost = float(totals[j])
            best = tuple(int(x) for x in prof[j])
    return best, total_cost(game, best)


def enumerate_equilibria(game: GameInstance, cap: int = DEFAULT_ENUM_CAP) -> list[StrategyProfile]:
    size = _check_cap(game, cap)
    found: list[StrategyProfile] = []
    for _, prof in _chunks(game, size):
        _, stable, _ = _evaluate(game, prof, with_nash=True)
        found.extend(tuple(int(x) for x in row) for row in prof[stable])
    return found


def optimal_profile(game: GameInstance, cap: int = 200_000) -> tuple[StrategyProfile, float]:
    """Exact social optimum without enumerating all ``(A+1)^N`` profiles.

    Once the number of users on every AP is fixed, each offloader on AP ``a``
    pays ``k_i * n_a / B_a`` plus a term that does not depend on the AP. By
    the rearrangement inequality the offloaders with the largest ``k_i`` take
    the cheapest slots, so a dynamic programme over users sorted by ``k_i``
    decides who stays local. The programme runs for all count vectors at
    once and the cheapest one wins.
    """
    N, A = game.n_users, game.n_aps
    if math.comb(N + A, A) > cap:
        raise InstanceTooLargeError(f"{math.comb(N + A, A)} AP count vectors exceed the cap {cap}")
    k, t, L, B = game.tx_coeff, game.cloud_coeff, game.local_costs, game.bandwidths
    vecs = np.array(_count_vectors(N, A), dtype=np.int64)  # (V, A)
    V = len(vecs)
    n_tot = vecs.sum(axis=1)
    share = np.ones(V) if game.elastic else n_tot.astype(float)
    # slot prices, ascending, padded with inf beyond n_tot
    prices = np.full((V, N), np.inf)
    slot_ap = np.zeros((V, N), dtype=np.int64)
    for v, vec in enumerate(vecs):
        p = np.repeat(vec / B, vec)
        ap = np.repeat(np.arange(1, A + 1), vec)
        order = np.lexsort((ap, p))
        prices[v, : len(p)] = p[order]
        slot_ap[v, : len(p)] = ap[order]
    users = sorted(range(N), key=lambda i: (-k[i], i))
    dp = np.full((V, N + 1), np.inf)
    dp[:, 0] = 0.0
    took = np.zeros((N, V, N + 1), dtype=bool)
    for j, i in enumerate(users):
        stay = dp + L[i]
        go = np.full_like(dp, np.inf)
        go[:, 1:] = dp[:, :-1] + k[i] * prices + (t[i] * share)[:, None]
        took[j] = go < stay
        dp = np.minimum(stay, go)
    # every slot of the count vector must be used
    final = dp[np.arange(V), n_tot]
    v = int(np.argmin(final))
    s = int(n_tot[v])
    prof = [0] * N
    for j in range(N - 1, -1, -1):
        if took[j, v, s]:
            s -= 1
            prof[users[j]] = int(slot_ap[v, s])
    assert s == 0
    best = tuple(prof)
    return best, total_cost(game, best)


def _count_vectors(n: int, a: int) -> list[tuple[int, ...]]:
    if a == 0:
        return [()]
    out = []
    for first in range(n + 1):
        for rest in _count_vectors(n - first, a - 1):
            out.append((first,) + rest)
    return out


def poa_upper_bound(game: GameInstance) -> float:
    """Sum of local costs over the sum of each user's cheapest conceivable cost.

    A user's cheapest offloading cost is reached alone on an AP with the
    whole cloud to themselves: ``k_i / B_a + t_i``.
    """
    k, t, L, B = game.tx_coeff, game.cloud_coeff, game.local_costs, game.bandwidths
    alone = k[:, None] / B[None, :] + t[:, None]
    floor = np.minimum(L, alone.min(axis=1))
    return float(L.sum() / floor.sum())


@dataclass(frozen=True)
class PoaReport:
    optimal_cost: float
    optimal_profile: StrategyProfile
    worst_ne_cost: float
    worst_ne_profile: StrategyProfile
    best_ne_cost: float
    ne_count: int
    empirical_poa: float
    poa_upper_bound: float
    # largest C_i / L_i over all users and all equilibria; at most 1 up to rounding
    max_ne_cost_to_local: float


def poa_report(game: GameInstance, cap: int = DEFAULT_ENUM_CAP) -> PoaReport:
    size = _check_cap(game, cap)
    best_tot, worst_tot = np.inf, -np.inf
    opt_tot = np.inf
    opt_prof = worst_prof = ()
    count = 0
    worst_ratio = -np.inf
    L = game.local_costs
    for _, prof in _chunks(game, size):
        cost, stable, _ = _evaluate(game, prof, with_nash=True)
        totals = cost.sum(axis=1)
        j = int(np.argmin(totals))
        if totals[j] < opt_tot:
            opt_tot, opt_prof = float(totals[j]), tuple(int(x) for x in prof[j])
        if stable.any():
            eq = np.flatnonzero(stable)
            count += eq.size
            worst_ratio = max(worst_ratio, float((cost[eq] / L[None, :]).max()))
            lo, hi = eq[np.argmin(totals[eq])], eq[np.argmax(totals[eq])]
            best_tot = min(best_tot, float(totals[lo]))
            if totals[hi] > worst_tot:
                worst_tot, worst_prof = float(totals[hi]), tuple(int(x) for x in prof[hi])
    if count == 0:
        raise RuntimeError("no pure equilibrium found; this contradicts the existence results")
    return PoaReport(
        optimal_cost=opt_tot,
        optimal_profile=opt_prof,
        worst_ne_cost=worst_tot,
        worst_ne_profile=worst_prof,
        best_ne_cost=best_tot,
        ne_count=count,
        empirical_poa=worst_tot / opt_tot,
        poa_upper_bound=poa_upper_bound(game),
        max_ne_cost_to_local=worst_ratio,
    )
