from pathlib import Path

import numpy as np
import pytest

from feedersim.ingest import config_from_dict, load_weather
from feedersim.scenario import (
    TruncGauss, generate_scenario, load_scenario, sample_trunc_gauss,
    save_scenario, scenario_to_json,
)

SAMPLE_DIR = Path(__file__).resolve().parent.parent / "sample_data"


def week_config(**over):
    base = {"n_intervals": 672}
    base.update(over)
    return config_from_dict(base)


@pytest.fixture(scope="module")
def week_weather():
    return load_weather(SAMPLE_DIR / "weather_2017.csv", week_config().grid())


class TestTruncGauss:
    def test_zero_sd_returns_mean(self):
        rng = np.random.default_rng(0)
        tg = TruncGauss(10.0, 0.0, 5.0, 15.0)
        assert all(sample_trunc_gauss(tg, rng) == 10.0 for _ in range(10))

    def test_degenerate_bounds_force_value(self):
        rng = np.random.default_rng(0)
        tg = TruncGauss(10.0, 2.0, 7.0, 7.0)
        assert all(sample_trunc_gauss(tg, rng) == 7.0 for _ in range(10))

    def test_lo_above_hi_rejected(self):
        with pytest.raises(ValueError):
            TruncGauss(0.0, 1.0, 2.0, 1.0)

    def test_monte_carlo_mean(self):
        # 1e4 draws of (3500, 700) truncated at +-2 sigma; bound checked
        # empirically across seeds before freezing (observed deviations < 10)
        rng = np.random.default_rng(1234)
        tg = TruncGauss(3500.0, 700.0, 2100.0, 4900.0)
        samples = np.array([sample_trunc_gauss(tg, rng) for _ in range(10_000)])
        assert abs(samples.mean() - 3500.0) < 50.0
        assert samples.min() >= 2100.0 and samples.max() <= 4900.0


class TestGenerateScenario:
    def test_deterministic_byte_identical(self, week_weather):
        cfg = week_config()
        a = generate_scenario(cfg, week_weather, np.random.default_rng(42))
        b = generate_scenario(cfg, week_weather, np.random.default_rng(42))
        assert scenario_to_json(cfg, a) == scenario_to_json(cfg, b)

    def test_penetration_counts_default(self, week_weather):
        houses = generate_scenario(week_config(), week_weather,
                                   np.random.default_rng(42))
        assert len(houses) == 10
        assert sum(1 for h in houses if h.pv is not None) == 5
        assert sum(1 for h in houses if h.battery is not None) == 5
        assert sum(1 for h in houses if h.heatpump is not None) == 5
        kinds = [v.label for h in houses for v in h.vehicles]
        assert kinds.count("ev") == 5
        assert kinds.count("phev") == 5

    def test_session_invariants(self, week_weather):
        houses = generate_scenario(week_config(), week_weather,
                                   np.random.default_rng(7))
        dt_h = week_config().grid().dt_h
        n_sessions = 0
        for h in houses:
            for veh in h.vehicles:
                for s in veh.sessions:
                    n_sessions += 1
                    assert s.arrival < s.departure
                    assert s.required_kwh <= veh.capacity_kwh
                    window_kwh = veh.max_power_w * (s.departure - s.arrival) * dt_h / 1000
                    assert s.required_kwh <= window_kwh
        assert n_sessions > 0

    def test_base_load_energy_matches_annual_share(self, week_weather):
        cfg = week_config()
        houses = generate_scenario(cfg, week_weather, np.random.default_rng(3))
        fraction = 672 / 35040  # the generator spreads annual energy over its horizon
        for h in houses:
            assert np.all(h.base_load.values >= 0.0)
            target = h.annual_kwh * fraction
            # horizon energy tracks the annual draw scaled to the horizon length
            assert h.base_load.energy_kwh() == pytest.approx(target, rel=0.01)

    def test_annual_energy_exact_on_full_year(self):
        cfg = config_from_dict({"n_houses": 2})
        weather = load_weather(SAMPLE_DIR / "weather_2017.csv", cfg.grid())
        houses = generate_scenario(cfg, weather, np.random.default_rng(11))
        for h in houses:
            assert h.base_load.energy_kwh() == pytest.approx(h.annual_kwh, rel=1e-9)

    def test_pv_parameters_in_range(self, week_weather):
        houses = generate_scenario(week_config(), week_weather,
                                   np.random.default_rng(42))
        for h in houses:
            if h.pv is not None:
                assert 0.15 <= h.pv.efficiency <= 0.20
                assert 8.0 <= h.pv.area_m2 <= 25.0

    def test_battery_capacity_range(self, week_weather):
        houses = generate_scenario(week_config(), week_weather,
                                   np.random.default_rng(42))
        for h in houses:
            if h.battery is not None:
                assert 2.0 <= h.battery.capacity_kwh <= 12.0
                assert h.battery.max_power_w == 3700.0

    def test_jobs_fit_within_one_day(self, week_weather):
        houses = generate_scenario(week_config(), week_weather,
                                   np.random.default_rng(42))
        for h in houses:
            for ts in h.timeshiftables:
                assert ts.jobs, "every house runs appliances"
                for job in ts.jobs:
                    day = job.earliest_start // 96
                    assert job.deadline // 96 == day
                    assert job.earliest_start + job.length - 1 <= job.deadline

    def test_occupancy_types_present(self, week_weather):
        houses = generate_scenario(week_config(n_houses=30), week_weather,
                                   np.random.default_rng(42))
        kinds = {h.occupancy_type for h in houses}
        assert kinds == {"single", "couple", "family"}


class TestScenarioSerialization:
    def test_roundtrip(self, tmp_path, week_weather):
        cfg = week_config(n_houses=4)
        houses = generate_scenario(cfg, week_weather, np.random.default_rng(9))
        path = tmp_path / "scenario.json"
        save_scenario(path, cfg, houses)
        cfg2, houses2 = load_scenario(path)
        assert scenario_to_json(cfg2, houses2) == scenario_to_json(cfg, houses)

    def test_roundtrip_preserves_devices(self, tmp_path, week_weather):
        cfg = week_config(n_houses=6)
        houses = generate_scenario(cfg, week_weather, np.random.default_rng(10))
        path = tmp_path / "scenario.json"
        save_scenario(path, cfg, houses)
        _, houses2 = load_scenario(path)
        for a, b in zip(houses, houses2):
            assert (a.battery is None) == (b.battery is None)
            assert (a.pv is None) == (b.pv is None)
            assert len(a.vehicles) == len(b.vehicles)
            np.testing.assert_array_equal(a.base_load.values, b.base_load.values)
            for ta, tb in zip(a.timeshiftables, b.timeshiftables):
                assert len(ta.jobs) == len(tb.jobs)
                for ja, jb in zip(ta.jobs, tb.jobs):
                    np.testing.assert_array_equal(ja.shape_w, jb.shape_w)
                    assert (ja.earliest_start, ja.deadline) == (jb.earliest_start, jb.deadline)
