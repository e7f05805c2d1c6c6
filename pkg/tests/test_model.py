from __future__ import annotations

import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import all_profiles, games, games_with_profile, one_ap_game, raw_cost, raw_is_nash, scenario
from offloadgame import (
    AccessPoint,
    Cloud,
    CloudModel,
    GameInstance,
    MobileUser,
    build_cycle_instance,
    congestion_counts,
    improving_deviations,
    is_nash,
    local_cost,
    offload_cost,
    reluctance,
    total_cost,
    uplink_rate,
    user_cost,
)
from offloadgame.model import (
    InconsistentQueryError,
    InvalidProfileError,
    NotAnOffloaderError,
    strictly_less,
)


def five_user_game(cloud="nonelastic"):
    return build_cycle_instance().game.with_cloud(cloud)


class TestTypes:
    def test_weights_must_be_ordered(self):
        with pytest.raises(ValueError):
            MobileUser(1e6, 1e9, 1e9, weight_time=0.3, weight_energy=0.3)
        with pytest.raises(ValueError):
            MobileUser(1e6, 1e9, 1e9, weight_time=0.0, weight_energy=0.0)
        with pytest.raises(ValueError):
            MobileUser(1e6, 1e9, 1e9, weight_time=1.2)

    @pytest.mark.parametrize("field", ["data_bits", "cycles", "local_speed"])
    def test_sizes_positive(self, field, plain_user):
        with pytest.raises(ValueError):
            dataclasses.replace(plain_user, **{field: 0.0})

    def test_bandwidth_and_cloud_positive(self):
        with pytest.raises(ValueError):
            AccessPoint(0.0)
        with pytest.raises(ValueError):
            CloudModel(Cloud.ELASTIC, -1.0)

    def test_cloud_kind_from_string(self):
        assert CloudModel("nonelastic", 1e9).kind is Cloud.NONELASTIC
        assert CloudModel("elastic", 1e9).elastic


class TestCongestionCounts:
    def test_example_profile(self):
        assert congestion_counts(five_user_game(), (1, 2, 1, 0, 0)) == ((2, 1, 0), 3)

    def test_all_local(self):
        assert congestion_counts(five_user_game(), (0,) * 5) == ((0, 0, 0), 0)

    def test_single_ap(self):
        assert congestion_counts(one_ap_game(3), (1, 1, 1)) == ((3,), 3)

    def test_length_mismatch(self):
        with pytest.raises(InvalidProfileError):
            congestion_counts(five_user_game(), (1, 2))

    def test_out_of_range(self):
        with pytest.raises(InvalidProfileError):
            congestion_counts(five_user_game(), (4, 0, 0, 0, 0))


class TestRates:
    def test_three_way_split(self):
        g = one_ap_game(3, bandwidth=6e6)
        assert uplink_rate(g, 0, (1, 1, 1)) == 2e6

    def test_sole_user(self):
        assert uplink_rate(one_ap_game(1), 0, (1,)) == 5e6

    def test_equal_sharing(self):
        g = one_ap_game(2)
        assert uplink_rate(g, 0, (1, 1)) == uplink_rate(g, 1, (1, 1)) == 2.5e6

    def test_local_user_has_no_rate(self):
        with pytest.raises(NotAnOffloaderError):
            uplink_rate(one_ap_game(2), 0, (0, 1))


class TestLocalCost:
    def test_time_only(self, plain_user):
        assert local_cost(plain_user) == 0.5

    def test_energy_weight_zero_ignores_energy(self, plain_user):
        assert local_cost(dataclasses.replace(plain_user, energy_per_cycle=5.0)) == 0.5

    def test_mixed_weights(self):
        u = MobileUser(1e6, 0.4e9, 0.8e9, energy_per_cycle=6.4e-12, weight_time=0.8, weight_energy=0.2)
        assert local_cost(u) == pytest.approx(0.8 * 0.5 + 0.2 * 6.4e-12 * 0.4e9, rel=1e-12)
        assert local_cost(u) == pytest.approx(0.400512, rel=1e-12)


class TestOffloadCost:
    def two_ap_game(self, cloud):
        u = MobileUser(1e6, 0.5e9, 1e9)
        return GameInstance((u, u), (AccessPoint(5e6), AccessPoint(5e6)), CloudModel(cloud, 100e9))

    def test_elastic_sole_user(self):
        g = self.two_ap_game("elastic")
        assert offload_cost(g, 0, 1, (1, 0)) == pytest.approx(0.205, rel=1e-12)

    def test_models_agree_with_one_offloader(self):
        e, ne = self.two_ap_game("elastic"), self.two_ap_game("nonelastic")
        assert offload_cost(e, 0, 1, (1, 0)) == offload_cost(ne, 0, 1, (1, 0))

    def test_nonelastic_shared_cloud(self):
        g = self.two_ap_game("nonelastic")
        assert offload_cost(g, 0, 1, (1, 2)) == pytest.approx(0.2 + 2 * 0.005, rel=1e-12)

    def test_wrong_ap_query(self):
        with pytest.raises(InconsistentQueryError):
            offload_cost(self.two_ap_game("elastic"), 0, 2, (1, 0))

    @given(games_with_profile())
    def test_matches_raw_formula(self, gp):
        g, prof = gp
        for i, s in enumerate(prof):
            if s:
                assert offload_cost(g, i, s, prof) == pytest.approx(raw_cost(g, i, prof), rel=1e-12)


class TestUserCost:
    def test_local_branch(self):
        g = five_user_game()
        assert user_cost(g, 3, (1, 2, 1, 0, 0)).total == g.local_costs[3]

    def test_single_user(self):
        g = one_ap_game(1)
        assert user_cost(g, 0, (1,)).total == offload_cost(g, 0, 1, (1,))

    def test_shared_ap_counts_both(self):
        g = five_user_game()
        c = user_cost(g, 0, (1, 2, 1, 0, 0))
        u = g.users[0]
        assert c.total == pytest.approx(u.data_bits * 2 / 5e6 + u.cycles * 3 / 10e9, rel=1e-12)

    @given(games_with_profile())
    def test_breakdown_sums(self, gp):
        g, prof = gp
        for i in range(g.n_users):
            c = user_cost(g, i, prof)
            assert c.total == pytest.approx(c.time_component + c.energy_component, rel=1e-12)
            assert c.decision == prof[i]

    @given(games_with_profile(), st.data())
    def test_local_cost_ignores_others(self, gp, data):
        g, prof = gp
        other = tuple(data.draw(st.integers(0, g.n_aps)) for _ in prof)
        mixed = (0,) + other[1:]
        assert user_cost(g, 0, mixed).total == user_cost(g, 0, (0,) + prof[1:]).total


class TestTotalCost:
    def test_all_local(self):
        g = five_user_game()
        assert total_cost(g, (0,) * 5) == pytest.approx(sum(g.local_costs), rel=1e-12)

    @given(games_with_profile())
    def test_matches_raw_sum(self, gp):
        g, prof = gp
        assert total_cost(g, prof) == pytest.approx(sum(raw_cost(g, i, prof) for i in range(g.n_users)), rel=1e-12)


class TestReluctance:
    def test_ratio(self):
        g = five_user_game()
        prof = (1, 2, 1, 0, 0)
        assert reluctance(g, 0, prof) == offload_cost(g, 0, 1, prof) / g.local_costs[0]

    def test_local_user_rejected(self):
        with pytest.raises(NotAnOffloaderError):
            reluctance(five_user_game(), 3, (1, 2, 1, 0, 0))

    def test_indifferent_user_has_unit_reluctance(self):
        # d/B + c/fc = c/f  with d=1e6, B=5e6, c=0.5e9, fc=100e9 -> f = 0.5e9/0.205
        u = MobileUser(1e6, 0.5e9, 0.5e9 / 0.205)
        g = GameInstance((u,), (AccessPoint(5e6),), CloudModel("elastic", 100e9))
        assert reluctance(g, 0, (1,)) == pytest.approx(1.0, rel=1e-12)

    def test_ranking_matches_sort(self):
        g = scenario(8, 1, "nonelastic", 0)
        prof = (1,) * 8
        ranked = sorted(range(8), key=lambda i: -reluctance(g, i, prof))
        brute = sorted(range(8), key=lambda i: -raw_cost(g, i, prof) / g.local_costs[i])
        assert ranked == brute


class TestDeviations:
    def test_cycle_start_has_move_for_c(self):
        fx = build_cycle_instance()
        assert 2 in improving_deviations(fx.game, 2, fx.initial)

    def test_cycle_start_not_nash(self):
        fx = build_cycle_instance()
        verdict = is_nash(fx.game, fx.initial)
        assert not verdict
        # a and c share AP 1, and an AP switch helps both or neither; a has the lower index
        # and the cheapest improvement is AP 3
        assert verdict.witness == (0, 3)
        assert {2, 3} <= improving_deviations(fx.game, 0, fx.initial)
        assert improving_deviations(fx.game, 0, fx.initial) == improving_deviations(fx.game, 2, fx.initial)

    def test_two_users_one_ap_exhaustive(self):
        g = scenario(2, 1, "nonelastic", 3)
        for prof in all_profiles(g):
            for i in range(2):
                here = raw_cost(g, i, prof)
                expected = set()
                for s in range(2):
                    dev = list(prof)
                    dev[i] = s
                    if s != prof[i] and strictly_less(raw_cost(g, i, dev), here):
                        expected.add(s)
                assert improving_deviations(g, i, prof) == expected

    def test_single_user_argmin_is_nash(self):
        g = scenario(1, 3, "elastic", 0)
        costs = [raw_cost(g, 0, (s,)) for s in range(4)]
        assert is_nash(g, (costs.index(min(costs)),))

    @settings(max_examples=150)
    @given(games_with_profile(max_users=4, max_aps=3))
    def test_agrees_with_second_checker(self, gp):
        g, prof = gp
        assert bool(is_nash(g, prof)) == raw_is_nash(g, prof)

    @given(games_with_profile(), st.floats(0.05, 1.0))
    def test_weight_scaling_keeps_deviations(self, gp, lam):
        g, prof = gp
        i = 0
        u = g.users[i]
        lam = min(lam, 1.0 / u.weight_time)
        scaled = dataclasses.replace(u, weight_time=u.weight_time * lam, weight_energy=u.weight_energy * lam)
        g2 = GameInstance((scaled,) + g.users[1:], g.aps, g.cloud)
        assert user_cost(g2, i, prof).total == pytest.approx(lam * user_cost(g, i, prof).total, rel=1e-12)
        costs = [raw_cost(g, i, prof[:i] + (x,) + prof[i + 1 :]) for x in range(g.n_aps + 1)]
        here = costs[prof[i]]
        # margins inside the comparison slack can legitimately flip under rescaling
        if all(abs(c - here) > 1e-6 * max(1.0, here) for k, c in enumerate(costs) if k != prof[i]):
            assert improving_deviations(g2, i, prof) == improving_deviations(g, i, prof)


class TestCongestionMonotone:
    @given(games_with_profile())
    def test_extra_user_on_same_ap_costs_more(self, gp):
        g, prof = gp
        g2 = g.with_user(g.users[0])
        for a in range(1, g.n_aps + 1):
            for i, s in enumerate(prof):
                if s == a:
                    before = user_cost(g, i, prof).total
                    after = user_cost(g2, i, prof + (a,)).total
                    assert after > before

    @given(games_with_profile(cloud="nonelastic"))
    def test_nonelastic_any_new_offloader_costs_more(self, gp):
        g, prof = gp
        g2 = g.with_user(g.users[0])
        for a in range(1, g.n_aps + 1):
            for i, s in enumerate(prof):
                if s:
                    assert user_cost(g2, i, prof + (a,)).total > user_cost(g, i, prof).total

    @given(games_with_profile())
    def test_rate_times_count_is_bandwidth(self, gp):
        g, prof = gp
        per_ap, _ = congestion_counts(g, prof)
        for i, s in enumerate(prof):
            if s:
                assert uplink_rate(g, i, prof) * per_ap[s - 1] == pytest.approx(g.aps[s - 1].bandwidth, rel=1e-15)


@given(games(max_users=3))
def test_cached_coefficients_consistent(g):
    for i in range(g.n_users):
        assert g.local_costs[i] == local_cost(g.users[i])
