from __future__ import annotations

import csv
import io
import json
import math

import numpy as np
import pytest

from conftest import scenario
from offloadgame import (
    ScenarioConfig,
    cost_ratio,
    generate,
    is_nash,
    offloading_difference_ratio,
    optimal_profile,
    poa_upper_bound,
    run_batch,
    solve,
)
from offloadgame.scenario import (
    ConfigError,
    derive_seed,
    instance_from_dict,
    instance_to_dict,
    mean_ci,
)


class TestConfig:
    def test_defaults(self):
        c = ScenarioConfig()
        assert c.bandwidth_mean_hz == 5e6
        assert c.bandwidth_sd_fraction == 0.2
        assert c.data_bits_range == (0.42e6, 2e6)
        assert c.cycles_range == (0.1e9, 0.8e9)
        assert c.local_speed_range == (0.5e9, 1e9)
        assert c.tx_power_w == 0.4
        assert c.cloud_speed == 100e9

    @pytest.mark.parametrize(
        "kw",
        [
            {"data_bits_range": (2e6, 1e6)},
            {"cycles_range": (0.0, 1e9)},
            {"cloud": "fluffy"},
            {"n_users": 0},
            {"bandwidth_mean_hz": -1.0},
            {"cloud_speed": 0.0},
            {"seed": -1},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            ScenarioConfig(**kw)

    def test_json_round_trip(self):
        c = ScenarioConfig(n_users=7, cloud="elastic", seed=2**63 + 5)
        assert ScenarioConfig.from_dict(json.loads(c.to_json())) == c

    def test_unknown_field_type_error(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"n_users": "many"})


class TestGenerate:
    def test_deterministic(self):
        c = ScenarioConfig(n_users=20, seed=42)
        assert generate(c) == generate(c)

    def test_seed_matters(self):
        assert generate(ScenarioConfig(seed=1)) != generate(ScenarioConfig(seed=2))

    def test_ranges_and_derived_fields(self):
        g = generate(ScenarioConfig(n_users=400, n_aps=20, seed=3))
        for u in g.users:
            assert 0.42e6 <= u.data_bits <= 2e6
            assert 0.1e9 <= u.cycles <= 0.8e9
            assert 0.5e9 <= u.local_speed <= 1e9
            assert u.energy_per_cycle == pytest.approx(1e-11 * (u.local_speed / 1e9) ** 2)
            assert 2.5e-12 <= u.energy_per_cycle <= 1e-11
            assert u.tx_power == 0.4
            assert 0 <= u.weight_energy < u.weight_time <= 1
        assert all(ap.bandwidth > 0 for ap in g.aps)
        assert g.cloud.capability == 100e9

    def test_bandwidth_mean(self):
        g = generate(ScenarioConfig(n_users=1, n_aps=10_000, seed=7))
        b = np.array([ap.bandwidth for ap in g.aps])
        assert abs(b.mean() - 5e6) < 3 * 1e6 / math.sqrt(b.size)
        assert b.std() == pytest.approx(1e6, rel=0.05)

    def test_weights_look_like_ordered_uniform_pair(self):
        g = generate(ScenarioConfig(n_users=4000, n_aps=1, seed=8))
        wt = np.array([u.weight_time for u in g.users])
        we = np.array([u.weight_energy for u in g.users])
        # max and min of two U[0,1] draws have means 2/3 and 1/3
        assert wt.mean() == pytest.approx(2 / 3, abs=0.02)
        assert we.mean() == pytest.approx(1 / 3, abs=0.02)

    def test_non_positive_bandwidths_resampled(self):
        g = generate(ScenarioConfig(n_users=1, n_aps=500, bandwidth_sd_fraction=1.0, seed=0))
        assert min(ap.bandwidth for ap in g.aps) > 0


class TestSeeds:
    def test_stable(self):
        assert derive_seed(0, 5, 3, 1) == derive_seed(0, 5, 3, 1)
        assert 0 <= derive_seed(2**64 - 1, 1) < 2**64

    def test_distinct(self):
        seeds = {derive_seed(9, n, 3, r) for n in range(2, 11) for r in range(500)}
        assert len(seeds) == 9 * 500


class TestMetrics:
    def test_identical_profiles(self):
        g = scenario(6, 3, "nonelastic", 0)
        prof, _ = solve(g)
        assert cost_ratio(g, prof, prof) == 1.0
        assert offloading_difference_ratio(g, prof, prof) == 0.0

    def test_extremes(self):
        g = scenario(4, 1, "nonelastic", 0)
        assert offloading_difference_ratio(g, (1, 1, 1, 1), (0, 0, 0, 0)) == 1.0
        assert offloading_difference_ratio(g, (0, 0, 0, 0), (1, 1, 1, 1)) == -1.0

    def test_ratio_between_one_and_bound(self):
        for seed in range(50):
            g = scenario(7, 3, "nonelastic", seed)
            ne, _ = solve(g, "random", seed=seed)
            opt, _ = optimal_profile(g)
            r = cost_ratio(g, ne, opt)
            assert 1 - 1e-12 <= r <= poa_upper_bound(g)


class TestInstanceFiles:
    def test_round_trip(self):
        g = scenario(4, 2, "elastic", 1)
        assert instance_from_dict(json.loads(json.dumps(instance_to_dict(g)))) == g

    def test_config_only(self):
        d = ScenarioConfig(n_users=3, seed=5).to_dict()
        assert instance_from_dict(d) == generate(ScenarioConfig(n_users=3, seed=5))

    def test_explicit_aps_random_users(self):
        g = instance_from_dict({"n_users": 3, "seed": 2, "aps": [{"bandwidth": 1e6}]})
        assert g.n_aps == 1 and g.aps[0].bandwidth == 1e6 and g.n_users == 3

    @pytest.mark.parametrize(
        "doc",
        [
            {"users": [{"data_bits": -1, "cycles": 1, "local_speed": 1}], "aps": [{"bandwidth": 1}]},
            {"users": [{"size": 1}], "aps": [{"bandwidth": 1}]},
            {"aps": [{}]},
            [1, 2],
        ],
    )
    def test_bad_documents(self, doc):
        with pytest.raises(ConfigError):
            instance_from_dict(doc)


class TestBatch:
    def test_single_record(self):
        res = run_batch(ScenarioConfig(), [1], [3], clouds=["elastic"], repetitions=1)
        assert len(res.records) == 1
        assert res.records[0].cost_ratio == pytest.approx(1.0)

    def test_records_and_aggregates(self):
        res = run_batch(ScenarioConfig(), [3, 5], [2], repetitions=6, master_seed=4)
        # elastic: one run per scenario; non-elastic: one per ordering
        assert len(res.records) == 2 * 6 + 2 * 6 * 2
        assert all(r.verified for r in res.records)
        agg = res.aggregate(model="nonelastic", n_users=5, ordering="ratio")
        ratios = [r.cost_ratio for r in res.records if r.key == (agg.model, 5, 2, "inductive", "ratio")]
        assert agg.samples == 6
        assert agg.means["cost_ratio"] == pytest.approx(np.mean(ratios))
        assert agg.half_widths["cost_ratio"] == pytest.approx(1.96 * np.std(ratios, ddof=1) / math.sqrt(6))

    def test_models_share_scenarios(self):
        res = run_batch(ScenarioConfig(), [4], [3], repetitions=3, master_seed=1)
        by_model = {}
        for r in res.records:
            by_model.setdefault(r.model, set()).add((r.rep, r.seed))
        assert by_model["elastic"] == by_model["nonelastic"]

    def test_records_verified_and_bounded(self):
        res = run_batch(ScenarioConfig(), [6], [3], repetitions=5, master_seed=2)
        for r in res.records:
            assert r.verified and r.cost_ratio >= 1 - 1e-12
            assert r.cost_ratio <= r.poa_bound

    def test_csv_layout(self):
        res = run_batch(ScenarioConfig(), [2, 3], [3], repetitions=2, master_seed=0)
        text = res.to_csv()
        records, aggregates = text.split("\n\n")
        rows = list(csv.reader(io.StringIO(records)))
        assert rows[0][:3] == ["model", "n_users", "n_aps"]
        assert len(rows) == 1 + len(res.records)
        agg_rows = list(csv.reader(io.StringIO(aggregates)))
        assert agg_rows[0][:6] == ["model", "n_users", "n_aps", "solver", "ordering", "samples"]
        assert "cost_ratio_ci95" in agg_rows[0]

    def test_json_output(self):
        res = run_batch(ScenarioConfig(), [3], [2], repetitions=2, with_optimum=False)
        doc = json.loads(res.to_json())
        assert doc["records"][0]["cost_ratio"] is None
        assert doc["aggregates"][0]["samples"] == 2

    def test_deterministic_and_parallel_safe(self):
        kw = dict(n_users=[3, 6], n_aps=[2], repetitions=4, master_seed=77)
        a = run_batch(ScenarioConfig(), **kw).to_csv()
        b = run_batch(ScenarioConfig(), **kw).to_csv()
        c = run_batch(ScenarioConfig(), jobs=2, **kw).to_csv()
        assert a == b == c

    def test_master_seed_matters(self):
        kw = dict(n_users=[4], n_aps=[2], repetitions=3)
        assert run_batch(ScenarioConfig(), master_seed=1, **kw).to_csv() != run_batch(
            ScenarioConfig(), master_seed=2, **kw
        ).to_csv()

    def test_bad_arguments(self):
        with pytest.raises(ConfigError):
            run_batch(ScenarioConfig(), [3], [2], repetitions=0)
        with pytest.raises(ConfigError):
            run_batch(ScenarioConfig(), [3], [2], jobs=0)


def test_mean_ci():
    assert mean_ci([2.0]) == (2.0, 0.0)
    m, h = mean_ci([1.0, 2.0, 3.0])
    assert m == 2.0 and h == pytest.approx(1.96 * 1.0 / math.sqrt(3))
    assert all(math.isnan(x) for x in mean_ci([math.nan]))


def test_scenario_equilibrium_spot_check():
    g = generate(ScenarioConfig(n_users=10, seed=1))
    assert is_nash(g, solve(g)[0])
