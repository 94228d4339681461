from datetime import datetime, timezone

import numpy as np
import pytest

from feedersim.devices import SteeringSignal
from feedersim.profiles import EnergyPrice, Profile, TimeGrid


def make_grid(n, interval_s=900, start=None):
    start = start or datetime(2017, 6, 1, tzinfo=timezone.utc)
    return TimeGrid(start, interval_s, n)


def make_signal(desired, prices, alpha, interval_s=900):
    g = make_grid(len(desired), interval_s)
    return SteeringSignal(
        Profile(g, np.asarray(desired, dtype=float)),
        EnergyPrice(g, np.asarray(prices, dtype=float)),
        alpha,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20170101)
