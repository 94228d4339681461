"""Time grids, power profiles and the distance/aggregation arithmetic.

Sign convention (global): consumption positive, generation negative.
All powers are in W, prices in EUR/kWh.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import IncompatibleGridError


@dataclass(frozen=True)
class TimeGrid:
    """Uniformly spaced time axis: `n_intervals` intervals of `interval_s` seconds."""

    start: datetime
    interval_s: int = 900
    n_intervals: int = 0

    def __post_init__(self):
        if self.start.tzinfo is None:
            raise ValueError("grid start must be timezone-aware (UTC)")
        if self.interval_s <= 0:
            raise ValueError("interval_s must be positive")
        if self.n_intervals <= 0:
            raise ValueError("n_intervals must be positive")

    @property
    def dt_h(self) -> float:
        """Interval length in hours."""
        return self.interval_s / 3600.0

    @property
    def end(self) -> datetime:
        return self.start + timedelta(seconds=self.interval_s * self.n_intervals)

    def timestamp_of(self, index: int) -> datetime:
        return self.start + timedelta(seconds=self.interval_s * index)

    def index_of(self, ts: datetime) -> int:
        """Index of the interval containing `ts`; ts must be on the grid span."""
        offset = (ts - self.start).total_seconds()
        if offset < 0 or offset >= self.interval_s * self.n_intervals:
            raise ValueError(f"timestamp {ts.isoformat()} outside grid span")
        return int(offset // self.interval_s)

    def subgrid(self, start_index: int, n: int) -> "TimeGrid":
        """Grid covering intervals [start_index, start_index + n)."""
        if start_index < 0 or n <= 0 or start_index + n > self.n_intervals:
            raise ValueError("subgrid out of range")
        return TimeGrid(self.timestamp_of(start_index), self.interval_s, n)

    def timestamps(self) -> list[datetime]:
        return [self.timestamp_of(i) for i in range(self.n_intervals)]


def year_grid_2017(interval_s: int = 900) -> TimeGrid:
    """The default experiment horizon: calendar year 2017, UTC."""
    start = datetime(2017, 1, 1, tzinfo=timezone.utc)
    n = 365 * 24 * 3600 // interval_s
    return TimeGrid(start, interval_s, n)


def _as_values(values, n: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise ValueError(f"expected {n} values, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("values must be finite")
    return arr


@dataclass
class Profile:
    """Power time series (W) on a shared grid; consumption positive."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = _as_values(self.values, self.grid.n_intervals)

    def energy_kwh(self) -> float:
        """Integral of the profile over the horizon, in kWh."""
        return float(self.values.sum()) * self.grid.dt_h / 1000.0

    @classmethod
    def zeros(cls, grid: TimeGrid) -> "Profile":
        return cls(grid, np.zeros(grid.n_intervals))


@dataclass
class EnergyPrice:
    """Price time series in EUR/kWh; negative prices allowed."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = _as_values(self.values, self.grid.n_intervals)


def _require_same_grid(*grids: TimeGrid) -> None:
    first = grids[0]
    for g in grids[1:]:
        if g != first:
            raise IncompatibleGridError("incompatible grids")


def euclidean_distance(a: Profile, b: Profile) -> float:
    """Euclidean distance between two profiles, in W."""
    _require_same_grid(a.grid, b.grid)
    diff = a.values - b.values
    return float(np.sqrt(np.dot(diff, diff)))


def aggregate(profiles: list[Profile], grid: TimeGrid | None = None) -> Profile:
    """Pointwise sum of profiles; an empty list yields zeros on `grid`."""
    if not profiles:
        if grid is None:
            raise ValueError("aggregate of empty list needs an explicit grid")
        return Profile.zeros(grid)
    _require_same_grid(*[p.grid for p in profiles])
    if grid is not None:
        _require_same_grid(profiles[0].grid, grid)
    total = np.zeros(profiles[0].grid.n_intervals)
    for p in profiles:
        total += p.values
    return Profile(profiles[0].grid, total)


def flat_target(agg: Profile) -> Profile:
    """Constant profile at the mean of `agg`: same horizon energy, zero variation."""
    mean = float(agg.values.mean())
    return Profile(agg.grid, np.full(agg.grid.n_intervals, mean))
