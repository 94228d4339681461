"""Planner tests: hand examples plus independent brute-force oracles.

The oracle evaluates the blended objective directly from its definition and
enumerates small feasible sets exhaustively; it never calls planner internals.
"""

import itertools
import math

import numpy as np
import pytest

from conftest import make_grid, make_signal
from feedersim.devices import (
    Buffer, BufferTimeShiftable, ChargingSession, Job,
    ThermalBuffer, TimeShiftable, objective, plan_buffer,
    plan_buffer_timeshiftable, plan_thermal, plan_timeshiftable, pv_profile,
    storage_trajectory,
)
from feedersim.errors import PlanningError

DT_H = 0.25


def eval_j(x, d, prices, alpha):
    """Objective evaluated straight from its definition (oracle side)."""
    x = np.asarray(x, float)
    d = np.asarray(d, float)
    prices = np.asarray(prices, float)
    beta = (np.linalg.norm(d) + 1e-9) / (np.linalg.norm(prices) + 1e-9)
    return alpha * float(((x - d) ** 2).sum()) + (1 - alpha) * beta * float(
        (prices * x).sum()) * DT_H


class TestObjective:
    def test_alpha_one_is_pure_squared_deviation(self):
        sig = make_signal([100.0, -50.0, 0.0], [0.5, 0.1, 0.9], 1.0)
        x = np.array([80.0, 0.0, 30.0])
        expected = float(((x - sig.desired.values) ** 2).sum())
        assert objective(x, sig) == pytest.approx(expected)

    def test_alpha_zero_is_pure_cost(self):
        sig = make_signal([100.0, -50.0, 0.0], [0.5, 0.1, 0.9], 0.0)
        x = np.array([80.0, 0.0, 30.0])
        expected = sig.beta() * float((sig.prices.values * x).sum()) * DT_H
        assert objective(x, sig) == pytest.approx(expected)

    def test_matches_oracle_formula(self):
        d = [120.0, -30.0, 55.0, 0.0]
        p = [0.03, 0.05, 0.01, 0.02]
        x = np.array([10.0, 90.0, -5.0, 40.0])
        for alpha in (0.0, 0.3, 0.5, 1.0):
            sig = make_signal(d, p, alpha)
            assert objective(x, sig) == pytest.approx(eval_j(x, d, p, alpha))

    def test_alpha_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            make_signal([0.0], [0.0], 1.5)


class TestTimeShiftable:
    def test_alpha_zero_picks_cheapest_slot(self):
        dev = TimeShiftable("wm", [Job(np.array([1000.0]), 0, 2)])
        sig = make_signal([0.0, 0.0, 0.0], [0.05, 0.01, 0.05], 0.0)
        out = plan_timeshiftable(dev, sig)
        np.testing.assert_allclose(out.values, [0.0, 1000.0, 0.0])

    def test_alpha_one_perfect_match(self):
        shape = np.array([500.0, 700.0])
        for k in range(4):
            d = np.zeros(6)
            d[k:k + 2] = shape
            dev = TimeShiftable("dw", [Job(shape, 0, 5)])
            out = plan_timeshiftable(dev, make_signal(d, np.zeros(6), 1.0))
            np.testing.assert_allclose(out.values, d)

    def test_two_jobs_match_exhaustive_enumeration(self):
        # disjoint windows, three feasible starts each: oracle checks all 9 pairs
        shape_a = np.array([800.0, 400.0])
        shape_b = np.array([600.0])
        dev = TimeShiftable("pair", [Job(shape_a, 0, 4), Job(shape_b, 5, 7)])
        rng = np.random.default_rng(99)
        for trial in range(30):
            d = rng.normal(0, 600, 8)
            prices = rng.uniform(0.0, 0.1, 8)
            sig = make_signal(d, prices, 0.5)
            out = plan_timeshiftable(dev, sig).values

            best = math.inf
            for sa, sb in itertools.product(range(3), range(5, 7)):
                x = np.zeros(8)
                x[sa:sa + 2] += shape_a
                x[sb:sb + 1] += shape_b
                best = min(best, eval_j(x, d, prices, 0.5))
            assert eval_j(out, d, prices, 0.5) <= best + 1e-9

    def test_tie_breaks_to_earliest_start(self):
        dev = TimeShiftable("wm", [Job(np.array([1000.0]), 0, 3)])
        sig = make_signal(np.zeros(4), np.full(4, 0.02), 0.0)
        out = plan_timeshiftable(dev, sig)
        assert out.values[0] == 1000.0

    def test_infeasible_window_identifies_job(self):
        with pytest.raises(ValueError, match="window"):
            Job(np.array([100.0, 100.0, 100.0]), 2, 3)
        dev = TimeShiftable("wm", [Job(np.array([100.0, 100.0]), 5, 6)])
        sig = make_signal(np.zeros(4), np.zeros(4), 1.0)  # window beyond grid
        with pytest.raises(PlanningError, match="job 0"):
            plan_timeshiftable(dev, sig)


def session_dev(power=7400.0, capacity=42.0, sessions=()):
    return BufferTimeShiftable("ev", capacity, power, list(sessions))


class TestBufferTimeShiftable:
    def test_alpha_one_flat_spread(self):
        # flat desired, energy spread evenly when below max power
        dev = session_dev(sessions=[ChargingSession(0, 8, 7.4)])
        sig = make_signal(np.zeros(8), np.zeros(8), 1.0)
        out = plan_buffer_timeshiftable(dev, sig)
        np.testing.assert_allclose(out.values, np.full(8, 7.4 * 1000 / (8 * DT_H)), rtol=1e-6)

    def test_alpha_zero_greedy_example(self):
        p_max = 4000.0
        need_kwh = 1.5 * p_max * DT_H / 1000.0
        dev = session_dev(power=p_max, sessions=[ChargingSession(0, 4, need_kwh)])
        sig = make_signal(np.zeros(4), np.array([3.0, 1.0, 2.0, 4.0]), 0.0)
        out = plan_buffer_timeshiftable(dev, sig)
        np.testing.assert_allclose(out.values, [0.0, p_max, 0.5 * p_max, 0.0])

    def test_alpha_zero_ties_prefer_earlier(self):
        p_max = 2000.0
        dev = session_dev(power=p_max, sessions=[ChargingSession(0, 4, p_max * DT_H / 1000.0)])
        sig = make_signal(np.zeros(4), np.full(4, 0.02), 0.0)
        out = plan_buffer_timeshiftable(dev, sig)
        np.testing.assert_allclose(out.values, [p_max, 0.0, 0.0, 0.0])

    def test_energy_constraint_met_exactly(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 10))
            p_max = float(rng.uniform(1000, 8000))
            e_kwh = float(rng.uniform(0.05, 0.95)) * p_max * n * DT_H / 1000.0
            dev = session_dev(power=p_max, capacity=100.0,
                              sessions=[ChargingSession(0, n, e_kwh)])
            alpha = float(rng.choice([0.0, 0.25, 0.5, 0.75, 1.0]))
            sig = make_signal(rng.normal(0, 2000, n), rng.uniform(0, 0.1, n), alpha)
            out = plan_buffer_timeshiftable(dev, sig).values
            assert np.all(out >= -1e-9) and np.all(out <= p_max + 1e-9)
            assert out.sum() * DT_H == pytest.approx(e_kwh * 1000.0, rel=1e-6)

    def test_matches_brute_force_on_grid_energies(self, rng):
        # energies on the oracle's power grid so the enumeration hits them exactly
        p_max = 4000.0
        n = 6
        levels = [0.0, 0.25 * p_max, 0.5 * p_max, 0.75 * p_max, p_max]
        for _ in range(25):
            k = int(rng.integers(1, 4 * n + 1))
            e_wh = k * 0.25 * p_max * DT_H
            d = rng.normal(0, 1500, n)
            prices = rng.uniform(0.0, 0.08, n)
            dev = session_dev(power=p_max, capacity=100.0,
                              sessions=[ChargingSession(0, n, e_wh / 1000.0)])
            for alpha in (0.0, 0.5, 1.0):
                sig = make_signal(d, prices, alpha)
                out = plan_buffer_timeshiftable(dev, sig).values
                best = math.inf
                for combo in itertools.product(levels, repeat=n):
                    if abs(sum(combo) * DT_H - e_wh) <= 1e-6:
                        best = min(best, eval_j(combo, d, prices, alpha))
                assert eval_j(out, d, prices, alpha) <= best + 1e-6 + 1e-9 * abs(best)

    def test_raising_price_never_raises_power_there(self, rng):
        p_max = 3000.0
        n = 8
        for alpha in (0.0, 0.3, 0.7):
            for _ in range(20):
                d = rng.normal(0, 1000, n)
                prices = rng.uniform(0.01, 0.09, n)
                e_kwh = float(rng.uniform(0.2, 0.8)) * p_max * n * DT_H / 1000.0
                dev = session_dev(power=p_max, capacity=100.0,
                                  sessions=[ChargingSession(0, n, e_kwh)])
                base = plan_buffer_timeshiftable(dev, make_signal(d, prices, alpha)).values
                t = int(rng.integers(0, n))
                bumped = prices.copy()
                bumped[t] += 0.05
                out = plan_buffer_timeshiftable(dev, make_signal(d, bumped, alpha)).values
                assert out[t] <= base[t] + 1e-6

    def test_infeasible_energy_rejected(self):
        dev = session_dev(power=1000.0, capacity=100.0,
                          sessions=[ChargingSession(0, 2, 10.0)])
        sig = make_signal(np.zeros(2), np.zeros(2), 1.0)
        with pytest.raises(PlanningError, match="exceeds window capacity"):
            plan_buffer_timeshiftable(dev, sig)

    def test_session_invariants_validated(self):
        dev = session_dev(sessions=[ChargingSession(4, 4, 1.0)])
        with pytest.raises(ValueError, match="arrival"):
            dev.validate_sessions(DT_H)
        dev = session_dev(capacity=5.0, sessions=[ChargingSession(0, 4, 6.0)])
        with pytest.raises(ValueError, match="capacity"):
            dev.validate_sessions(DT_H)


def battery(capacity=2.0, power=3700.0, soc0=1.0):
    return Buffer(capacity_kwh=capacity, max_power_w=power, soc0_kwh=soc0)


def soc_path(dev, x):
    return storage_trajectory(x, DT_H, dev.efficiency, 1.0, dev.soc0_kwh * 1000.0,
                              np.zeros(len(x)))


class TestBuffer:
    def test_alpha_one_zero_desired_stays_idle(self):
        for soc0 in (0.0, 1.0, 2.0):
            dev = battery(soc0=soc0)
            sig = make_signal(np.zeros(6), np.full(6, 0.05), 1.0)
            out = plan_buffer(dev, sig)
            np.testing.assert_array_equal(out.values, np.zeros(6))

    def test_alpha_zero_constant_prices_no_arbitrage(self):
        # empty battery, flat prices: nothing to sell, no spread to exploit
        dev = battery(soc0=0.0)
        sig = make_signal(np.zeros(8), np.full(8, 0.03), 0.0)
        out = plan_buffer(dev, sig)
        np.testing.assert_array_equal(out.values, np.zeros(8))

    def test_matches_brute_force_within_two_percent(self, rng):
        p = 3700.0
        n = 4
        for _ in range(25):
            cap = 2.0
            soc0 = float(rng.uniform(0.0, cap))
            dev = battery(capacity=cap, power=p, soc0=soc0)
            d = rng.normal(0, 2000, n)
            prices = rng.uniform(0.0, 0.08, n)
            for alpha in (0.0, 0.5, 1.0):
                sig = make_signal(d, prices, alpha)
                out = plan_buffer(dev, sig).values
                traj = soc_path(dev, out)
                assert traj.min() >= -1e-6 and traj.max() <= cap * 1000 + 1e-6
                best = math.inf
                for combo in itertools.product((-p, 0.0, p), repeat=n):
                    soc = soc_path(dev, np.array(combo))
                    if soc.min() >= -1e-9 and soc.max() <= cap * 1000 + 1e-9:
                        best = min(best, eval_j(combo, d, prices, alpha))
                assert eval_j(out, d, prices, alpha) <= best + 0.02 * abs(best) + 1e-6

    def test_invalid_soc0_rejected(self):
        sig = make_signal(np.zeros(4), np.zeros(4), 1.0)
        with pytest.raises(PlanningError, match="SoC"):
            plan_buffer(battery(capacity=2.0, soc0=3.0), sig)

    def test_plans_are_pure(self):
        dev = battery()
        sig = make_signal(np.array([500.0, -200.0, 100.0, 0.0]),
                          np.array([0.01, 0.05, 0.02, 0.04]), 0.5)
        a = plan_buffer(dev, sig).values
        b = plan_buffer(dev, sig).values
        np.testing.assert_array_equal(a, b)


def thermal(store=6.0, cop=3.0, power=2000.0, store0=3.0, demand=None, n=4):
    if demand is None:
        demand = np.zeros(n)
    return ThermalBuffer(store_kwh_th=store, cop=cop, max_power_w=power,
                         heat_demand_kwh=np.asarray(demand, float), store0_kwh=store0)


class TestThermal:
    def test_zero_demand_idle(self):
        dev = thermal()
        sig = make_signal(np.zeros(4), np.full(4, 0.04), 1.0)
        out = plan_thermal(dev, sig)
        np.testing.assert_array_equal(out.values, np.zeros(4))

    def test_forced_full_power_when_demand_saturates(self):
        cop, p = 3.0, 2000.0
        per_interval = cop * p * DT_H / 1000.0  # kWh(th) deliverable per interval
        dev = thermal(store=5.0, cop=cop, power=p, store0=0.0,
                      demand=np.full(4, per_interval))
        sig = make_signal(np.zeros(4), np.full(4, 0.05), 1.0)
        out = plan_thermal(dev, sig)
        np.testing.assert_allclose(out.values, np.full(4, p), rtol=1e-9)

    def test_matches_brute_force_within_two_percent(self, rng):
        cop, p = 3.0, 2000.0
        n = 4
        step_kwh = cop * p * DT_H / 1000.0  # thermal energy of one half-power step is /2
        for _ in range(25):
            demand = rng.choice([0.0, 0.25, 0.5], size=n) * step_kwh
            store0 = float(rng.uniform(0.3, 0.7)) * 4.0
            dev = thermal(store=4.0, cop=cop, power=p, store0=store0, demand=demand)
            d = rng.normal(0, 1500, n)
            prices = rng.uniform(0.0, 0.08, n)
            for alpha in (0.0, 0.5, 1.0):
                sig = make_signal(d, prices, alpha)
                out = plan_thermal(dev, sig).values
                traj = storage_trajectory(out, DT_H, cop, cop, store0 * 1000.0,
                                          demand * 1000.0)
                assert traj.min() >= -1e-6 and traj.max() <= 4000.0 + 1e-6
                best = math.inf
                for combo in itertools.product((0.0, 0.5 * p, p), repeat=n):
                    soc = storage_trajectory(combo, DT_H, cop, cop, store0 * 1000.0,
                                             demand * 1000.0)
                    if soc.min() >= -1e-9 and soc.max() <= 4000.0 + 1e-9:
                        best = min(best, eval_j(combo, d, prices, alpha))
                assert eval_j(out, d, prices, alpha) <= best + 0.02 * abs(best) + 1e-6

    def test_unservable_demand_names_interval(self):
        dev = thermal(store=1.0, cop=3.0, power=2000.0, store0=0.0,
                      demand=[0.0, 0.0, 9.0, 0.0])
        sig = make_signal(np.zeros(4), np.zeros(4), 1.0)
        with pytest.raises(PlanningError, match="interval 2"):
            plan_thermal(dev, sig)


class TestPv:
    def test_product_formula(self):
        g = make_grid(1)
        out = pv_profile(1.0, 0.20, np.array([1000.0]), g)
        assert out.values[0] == pytest.approx(-200.0)

    def test_night_is_zero(self):
        g = make_grid(2)
        out = pv_profile(5.0, 0.18, np.array([0.0, 0.0]), g)
        np.testing.assert_array_equal(out.values, [0.0, 0.0])

    def test_efficiency_range_enforced(self):
        g = make_grid(1)
        with pytest.raises(ValueError):
            pv_profile(1.0, 0.25, np.array([100.0]), g)
        with pytest.raises(ValueError):
            pv_profile(-1.0, 0.18, np.array([100.0]), g)
