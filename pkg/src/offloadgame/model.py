"""Players, access points, cost functions and equilibrium checks.

Indexing conventions used throughout the package:

* users are indexed ``0 .. N-1``;
* a strategy is an integer in ``0 .. A`` where ``0`` means local execution
  and ``a >= 1`` means offloading through access point ``a``;
* a strategy profile is a plain tuple of ints, one entry per user.

All congestion counts used inside cost formulas include the user whose cost
is being evaluated.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

StrategyProfile = tuple[int, ...]

LOCAL = 0

#: Relative slack for strict-improvement comparisons.
EPS_REL = 1e-9


class OffloadingError(Exception):
    """Base class for errors raised by this package."""


class InvalidProfileError(OffloadingError, ValueError):
    pass


class NotAnOffloaderError(OffloadingError, ValueError):
    pass


class InconsistentQueryError(OffloadingError, ValueError):
    pass


class WrongModelError(OffloadingError, ValueError):
    pass


def tolerance(value: float) -> float:
    return EPS_REL * max(1.0, abs(value))


def strictly_less(new: float, old: float) -> bool:
    """True iff ``new`` improves on ``old`` by more than the comparison slack."""
    return new < old - tolerance(old)


class Cloud(str, enum.Enum):
    ELASTIC = "elastic"
    NONELASTIC = "nonelastic"


@dataclass(frozen=True)
class MobileUser:
    """One device with one task.

    Units: bits, cycles, cycles/s, J/cycle, W. ``weight_time`` and
    ``weight_energy`` must satisfy ``0 <= weight_energy < weight_time <= 1``.
    """

    data_bits: float
    cycles: float
    local_speed: float
    energy_per_cycle: float = 0.0
    tx_power: float = 0.0
    weight_time: float = 1.0
    weight_energy: float = 0.0

    def __post_init__(self) -> None:
        if not self.data_bits > 0:
            raise ValueError(f"data_bits must be > 0, got {self.data_bits}")
        if not self.cycles > 0:
            raise ValueError(f"cycles must be > 0, got {self.cycles}")
        if not self.local_speed > 0:
            raise ValueError(f"local_speed must be > 0, got {self.local_speed}")
        if self.energy_per_cycle < 0 or self.tx_power < 0:
            raise ValueError("energy_per_cycle and tx_power must be >= 0")
        if not 0 <= self.weight_energy < self.weight_time <= 1:
            raise ValueError(
                "weights must satisfy 0 <= weight_energy < weight_time <= 1, got "
                f"weight_time={self.weight_time}, weight_energy={self.weight_energy}"
            )


@dataclass(frozen=True)
class AccessPoint:
    bandwidth: float

    def __post_init__(self) -> None:
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")


@dataclass(frozen=True)
class CloudModel:
    kind: Cloud
    capability: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", Cloud(self.kind))
        if not self.capability > 0:
            raise ValueError(f"cloud capability must be > 0, got {self.capability}")

    @property
    def elastic(self) -> bool:
        return self.kind is Cloud.ELASTIC


@dataclass(frozen=True)
class CostBreakdown:
    total: float
    time_component: float
    energy_component: float
    decision: int


@dataclass(frozen=True)
class GameInstance:
    users: tuple[MobileUser, ...]
    aps: tuple[AccessPoint, ...]
    cloud: CloudModel

    def __post_init__(self) -> None:
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "aps", tuple(self.aps))
        if not self.users:
            raise ValueError("a game needs at least one user")
        if not self.aps:
            raise ValueError("a game needs at least one access point")

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_aps(self) -> int:
        return len(self.aps)

    @property
    def elastic(self) -> bool:
        return self.cloud.elastic

    # Per-user coefficients. Offloading through AP a with n_a users on a and
    # n offloaders overall costs  k_i * n_a / B_a + t_i * (n or 1).

    @cached_property
    def bandwidths(self) -> np.ndarray:
        return np.array([ap.bandwidth for ap in self.aps], dtype=float)

    @cached_property
    def tx_coeff(self) -> np.ndarray:
        """``(wT + wE * p) * d`` for every user."""
        return np.array(
            [(u.weight_time + u.weight_energy * u.tx_power) * u.data_bits for u in self.users]
        )

    @cached_property
    def cloud_coeff(self) -> np.ndarray:
        """``wT * c / f_c`` for every user."""
        fc = self.cloud.capability
        return np.array([u.weight_time * u.cycles / fc for u in self.users])

    @cached_property
    def local_costs(self) -> np.ndarray:
        return np.array([local_cost(u) for u in self.users])

    def with_cloud(self, kind: Cloud | str) -> "GameInstance":
        return GameInstance(self.users, self.aps, CloudModel(Cloud(kind), self.cloud.capability))

    def with_user(self, user: MobileUser) -> "GameInstance":
        return GameInstance(self.users + (user,), self.aps, self.cloud)

    def restrict(self, indices: Iterable[int]) -> "GameInstance":
        """Game played by the listed users only (in the given order)."""
        return GameInstance(tuple(self.users[i] for i in indices), self.aps, self.cloud)


def check_profile(game: GameInstance, profile: Sequence[int]) -> StrategyProfile:
    prof = tuple(int(s) for s in profile)
    if len(prof) != game.n_users:
        raise InvalidProfileError(
            f"profile has {len(prof)} entries but the game has {game.n_users} users"
        )
    for i, s in enumerate(prof):
        if not 0 <= s <= game.n_aps:
            raise InvalidProfileError(f"user {i}: strategy {s} outside 0..{game.n_aps}")
    return prof


def congestion_counts(game: GameInstance, profile: Sequence[int]) -> tuple[tuple[int, ...], int]:
    """Users per AP (AP 1 first) and total number of offloaders."""
    prof = check_profile(game, profile)
    per_ap = [0] * game.n_aps
    for s in prof:
        if s != LOCAL:
            per_ap[s - 1] += 1
    return tuple(per_ap), sum(per_ap)


def uplink_rate(game: GameInstance, user: int, profile: Sequence[int]) -> float:
    prof = check_profile(game, profile)
    a = prof[user]
    if a == LOCAL:
        raise NotAnOffloaderError(f"user {user} computes locally")
    per_ap, _ = congestion_counts(game, prof)
    return game.aps[a - 1].bandwidth / per_ap[a - 1]


def local_cost(user: MobileUser) -> float:
    return (user.weight_time / user.local_speed + user.weight_energy * user.energy_per_cycle) * user.cycles


def _offload_value(game: GameInstance, i: int, a: int, n_a: int, n: int) -> float:
    share = n if not game.elastic else 1
    return game.tx_coeff[i] * n_a / game.aps[a - 1].bandwidth + game.cloud_coeff[i] * share


def offload_cost(game: GameInstance, user: int, ap: int, profile: Sequence[int]) -> float:
    """Cost of ``user`` offloading through ``ap``; the profile must already place them there."""
    prof = check_profile(game, profile)
    if not 1 <= ap <= game.n_aps:
        raise InconsistentQueryError(f"AP {ap} outside 1..{game.n_aps}")
    if prof[user] != ap:
        raise InconsistentQueryError(
            f"user {user} plays {prof[user]} in the profile, not AP {ap}"
        )
    per_ap, n = congestion_counts(game, prof)
    return float(_offload_value(game, user, ap, per_ap[ap - 1], n))


def user_cost(game: GameInstance, user: int, profile: Sequence[int]) -> CostBreakdown:
    prof = check_profile(game, profile)
    u = game.users[user]
    s = prof[user]
    if s == LOCAL:
        time_part = u.weight_time * u.cycles / u.local_speed
        energy_part = u.weight_energy * u.energy_per_cycle * u.cycles
        return CostBreakdown(local_cost(u), time_part, energy_part, s)
    per_ap, n = congestion_counts(game, prof)
    tx_time = u.data_bits * per_ap[s - 1] / game.aps[s - 1].bandwidth
    share = 1 if game.elastic else n
    time_part = u.weight_time * (tx_time + u.cycles / game.cloud.capability * share)
    energy_part = u.weight_energy * u.tx_power * tx_time
    total = float(_offload_value(game, user, s, per_ap[s - 1], n))
    return CostBreakdown(total, time_part, energy_part, s)


def total_cost(game: GameInstance, profile: Sequence[int]) -> float:
    prof = check_profile(game, profile)
    per_ap, n = congestion_counts(game, prof)
    total = 0.0
    for i, s in enumerate(prof):
        if s == LOCAL:
            total += game.local_costs[i]
        else:
            total += _offload_value(game, i, s, per_ap[s - 1], n)
    return float(total)


def reluctance(game: GameInstance, user: int, profile: Sequence[int]) -> float:
    """Current offloading cost over local cost; above 1 means the user would rather stay home."""
    prof = check_profile(game, profile)
    if prof[user] == LOCAL:
        raise NotAnOffloaderError(f"user {user} computes locally")
    return offload_cost(game, user, prof[user], prof) / game.local_costs[user]


def deviation_costs(
    game: GameInstance,
    user: int,
    profile: StrategyProfile,
    counts: tuple[tuple[int, ...], int] | None = None,
) -> list[float]:
    """Cost of ``user`` for every strategy ``0..A`` with the others held fixed.

    Counts for each candidate are re-derived as if the user had moved there.
    """
    per_ap, n = counts if counts is not None else congestion_counts(game, profile)
    cur = profile[user]
    # counts without the user
    n_wo = n - (cur != LOCAL)
    costs = [float(game.local_costs[user])]
    for a in range(1, game.n_aps + 1):
        n_a_wo = per_ap[a - 1] - (cur == a)
        costs.append(float(_offload_value(game, user, a, n_a_wo + 1, n_wo + 1)))
    return costs


def improving_deviations(game: GameInstance, user: int, profile: Sequence[int]) -> set[int]:
    prof = check_profile(game, profile)
    costs = deviation_costs(game, user, prof)
    cur = prof[user]
    return {s for s, c in enumerate(costs) if s != cur and strictly_less(c, costs[cur])}


@dataclass(frozen=True)
class NashVerdict:
    is_nash: bool
    witness: tuple[int, int] | None = None  # (user, better strategy)

    def __bool__(self) -> bool:
        return self.is_nash


def is_nash(game: GameInstance, profile: Sequence[int]) -> NashVerdict:
    """Exhaustive unilateral-deviation check.

    The witness, when there is one, is the first user (by index) with an
    improving deviation together with its cheapest such deviation.
    """
    prof = check_profile(game, profile)
    counts = congestion_counts(game, prof)
    for i, cur in enumerate(prof):
        costs = deviation_costs(game, i, prof, counts)
        better = [s for s, c in enumerate(costs) if s != cur and strictly_less(c, costs[cur])]
        if better:
            return NashVerdict(False, (i, min(better, key=lambda s: (costs[s], s))))
    return NashVerdict(True)
