from __future__ import annotations

import itertools
import sys

import pytest
from hypothesis import strategies as st

from offloadgame import AccessPoint, Cloud, CloudModel, GameInstance, MobileUser, ScenarioConfig, generate
from offloadgame.scenario import derive_seed


def raw_cost(game: GameInstance, i: int, profile) -> float:
    """User cost recomputed from the raw parameters, without the library's coefficients."""
    u = game.users[i]
    s = profile[i]
    if s == 0:
        return u.weight_time * u.cycles / u.local_speed + u.weight_energy * u.energy_per_cycle * u.cycles
    n_a = sum(1 for x in profile if x == s)
    n = sum(1 for x in profile if x != 0)
    rate = game.aps[s - 1].bandwidth / n_a
    tx_time = u.data_bits / rate
    cloud_speed = game.cloud.capability if game.elastic else game.cloud.capability / n
    time = tx_time + u.cycles / cloud_speed
    energy = u.tx_power * tx_time
    return u.weight_time * time + u.weight_energy * energy


def raw_is_nash(game: GameInstance, profile) -> bool:
    """Second deviation check: build every deviated profile and recompute from scratch."""
    for i in range(game.n_users):
        here = raw_cost(game, i, profile)
        for s in range(game.n_aps + 1):
            if s == profile[i]:
                continue
            dev = list(profile)
            dev[i] = s
            there = raw_cost(game, i, dev)
            if there < here - 1e-9 * max(1.0, abs(here)):
                return False
    return True


def all_profiles(game: GameInstance):
    return itertools.product(range(game.n_aps + 1), repeat=game.n_users)


def scenario(n: int, a: int, cloud: str, seed: int, master: int = 11, **kw) -> GameInstance:
    return generate(
        ScenarioConfig(n_users=n, n_aps=a, cloud=cloud, seed=derive_seed(master, n, a, seed), **kw)
    )


@st.composite
def users(draw):
    w_t = draw(st.floats(0.05, 1.0))
    w_e = draw(st.floats(0.0, 0.99)) * w_t
    f = draw(st.floats(0.2e9, 2e9))
    return MobileUser(
        data_bits=draw(st.floats(0.1e6, 3e6)),
        cycles=draw(st.floats(0.05e9, 1e9)),
        local_speed=f,
        energy_per_cycle=draw(st.floats(0.0, 2e-11)),
        tx_power=draw(st.floats(0.0, 1.0)),
        weight_time=w_t,
        weight_energy=w_e,
    )


@st.composite
def games(draw, max_users: int = 5, max_aps: int = 3, cloud=None):
    n = draw(st.integers(1, max_users))
    a = draw(st.integers(1, max_aps))
    kind = cloud or draw(st.sampled_from(["elastic", "nonelastic"]))
    aps = tuple(AccessPoint(draw(st.floats(1e6, 10e6))) for _ in range(a))
    fc = draw(st.sampled_from([2e9, 10e9, 100e9]))
    return GameInstance(tuple(draw(users()) for _ in range(n)), aps, CloudModel(Cloud(kind), fc))


@st.composite
def games_with_profile(draw, max_users: int = 5, max_aps: int = 3, cloud=None):
    g = draw(games(max_users, max_aps, cloud))
    prof = tuple(draw(st.integers(0, g.n_aps)) for _ in range(g.n_users))
    return g, prof


@pytest.fixture
def plain_user():
    return MobileUser(data_bits=1e6, cycles=0.5e9, local_speed=1e9)


def one_ap_game(n_users: int, bandwidth: float = 5e6, cloud: str = "elastic", fc: float = 100e9):
    user = MobileUser(data_bits=1e6, cycles=0.5e9, local_speed=1e9)
    return GameInstance((user,) * n_users, (AccessPoint(bandwidth),), CloudModel(Cloud(cloud), fc))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
