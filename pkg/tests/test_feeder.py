import numpy as np
import pytest

from conftest import make_grid
from feedersim.errors import FeederSimError
from feedersim.feeder import FeederModel, default_feeder, evaluate_feeder
from feedersim.profiles import Profile


def as_profiles(grid, rows):
    return {i: Profile(grid, np.asarray(row, dtype=float)) for i, row in enumerate(rows)}


class TestEvaluateFeeder:
    def test_single_segment_hand_example(self):
        grid = make_grid(1)
        feeder = FeederModel([0.1], {0: 0}, 230.0)
        result = evaluate_feeder(feeder, as_profiles(grid, [[4600.0]]))
        assert result.segment_current_a[0, 0] == pytest.approx(20.0)
        assert result.losses.values[0] == pytest.approx(40.0)
        assert result.substation.values[0] == pytest.approx(4640.0)

    def test_two_segment_hand_example(self):
        grid = make_grid(1)
        feeder = FeederModel([0.1, 0.1], {0: 0, 1: 1}, 230.0)
        result = evaluate_feeder(feeder, as_profiles(grid, [[2300.0], [2300.0]]))
        assert result.segment_current_a[0, 0] == pytest.approx(20.0)
        assert result.segment_current_a[1, 0] == pytest.approx(10.0)
        assert result.losses.values[0] == pytest.approx(50.0)
        assert result.substation.values[0] == pytest.approx(4650.0)

    def test_all_zero(self):
        grid = make_grid(4)
        feeder = default_feeder(2)
        result = evaluate_feeder(feeder, as_profiles(grid, [np.zeros(4), np.zeros(4)]))
        np.testing.assert_array_equal(result.losses.values, np.zeros(4))
        np.testing.assert_array_equal(result.substation.values, np.zeros(4))

    def test_substation_equals_houses_plus_losses(self, rng):
        grid = make_grid(16)
        feeder = default_feeder(5)
        profiles = as_profiles(grid, rng.normal(500, 2000, (5, 16)))
        result = evaluate_feeder(feeder, profiles)
        total = sum(p.values for p in profiles.values())
        np.testing.assert_allclose(result.substation.values,
                                   total + result.losses.values, rtol=1e-12)
        assert np.all(result.losses.values >= 0.0)

    def test_loss_scales_quadratically(self, rng):
        grid = make_grid(8)
        feeder = default_feeder(4)
        rows = rng.normal(0, 3000, (4, 8))
        base = evaluate_feeder(feeder, as_profiles(grid, rows))
        for k in (0.5, 2.0, 3.0):
            scaled = evaluate_feeder(feeder, as_profiles(grid, rows * k))
            np.testing.assert_allclose(scaled.losses.values,
                                       base.losses.values * k * k, rtol=1e-9)

    def test_losses_invariant_under_same_segment_permutation(self, rng):
        grid = make_grid(8)
        feeder = FeederModel([0.05, 0.05], {0: 1, 1: 1, 2: 0}, 230.0)
        rows = rng.normal(0, 2500, (3, 8))
        a = evaluate_feeder(feeder, as_profiles(grid, rows))
        swapped = as_profiles(grid, [rows[1], rows[0], rows[2]])  # swap houses on seg 1
        b = evaluate_feeder(feeder, swapped)
        np.testing.assert_allclose(a.losses.values, b.losses.values, rtol=1e-12)

    def test_reverse_flow_symmetric(self, rng):
        grid = make_grid(8)
        feeder = default_feeder(3)
        rows = np.abs(rng.normal(0, 2000, (3, 8)))
        consume = evaluate_feeder(feeder, as_profiles(grid, rows))
        export = evaluate_feeder(feeder, as_profiles(grid, -rows))
        np.testing.assert_allclose(consume.losses.values, export.losses.values,
                                   rtol=1e-12)

    def test_unattached_house_rejected(self):
        grid = make_grid(2)
        feeder = default_feeder(1)
        with pytest.raises(FeederSimError, match="not attached"):
            evaluate_feeder(feeder, as_profiles(grid, [[0.0, 0.0], [1.0, 1.0]]))


class TestDefaultFeeder:
    def test_ten_houses(self):
        feeder = default_feeder(10)
        assert len(feeder.resistances_ohm) == 10
        assert sum(feeder.resistances_ohm) == pytest.approx(0.5)
        assert feeder.v_nominal_v == 230.0
        assert feeder.attachment == {i: i for i in range(10)}

    def test_single_house(self):
        feeder = default_feeder(1)
        assert len(feeder.resistances_ohm) == 1

    def test_positive_resistances_enforced(self):
        with pytest.raises(ValueError):
            FeederModel([0.0], {0: 0})
        with pytest.raises(ValueError):
            default_feeder(0)
