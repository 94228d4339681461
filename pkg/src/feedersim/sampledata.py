"""Deterministic synthetic sample data: Kumpula-style weather, 2017-style prices.

Real measurements are not bundled; these generators produce hourly series with
the right seasonal/diurnal structure for the 2017 horizon.  The irradiance is
calibrated so that one square metre of panel at 17.5 % efficiency yields
220 kWh over the year, matching the documented average panel production.

Run ``python -m feedersim.sampledata --out sample_data`` to (re)write the
bundled CSVs; the output is byte-stable across runs.
"""

from __future__ import annotations

import argparse
from datetime import datetime, timezone

import numpy as np

from .ingest import WeatherSeries, write_prices, write_weather
from .profiles import EnergyPrice, TimeGrid

LATITUDE_DEG = 60.2
LONGITUDE_DEG = 24.96
ANNUAL_PANEL_KWH_PER_M2 = 220.0
REFERENCE_EFFICIENCY = 0.175

_HOURS = 8760
_SEED_WEATHER = 201701
_SEED_PRICES = 201702


def hourly_grid_2017() -> TimeGrid:
    return TimeGrid(datetime(2017, 1, 1, tzinfo=timezone.utc), 3600, _HOURS)


def _smooth_noise(rng, n, sigma, rho=0.95):
    noise = np.empty(n)
    value = 0.0
    for i in range(n):
        value = rho * value + rng.normal(0.0, sigma) * np.sqrt(1 - rho * rho)
        noise[i] = value
    return noise


def build_weather() -> WeatherSeries:
    """Full-year hourly temperature and irradiance for the 2017 horizon."""
    rng = np.random.default_rng(_SEED_WEATHER)
    grid = hourly_grid_2017()
    hours = np.arange(_HOURS)
    doy = hours // 24
    hod = hours % 24
    solar_hour = hod + LONGITUDE_DEG / 15.0

    seasonal = 5.5 - 12.5 * np.cos(2 * np.pi * (doy - 20) / 365.0)
    diurnal = 3.0 * np.sin(2 * np.pi * (solar_hour - 9.0) / 24.0)
    temp = seasonal + diurnal + _smooth_noise(rng, _HOURS, 3.2)
    temp = np.clip(temp, -40.0, 35.0)

    decl = np.deg2rad(23.45) * np.sin(2 * np.pi * (284 + doy) / 365.0)
    lat = np.deg2rad(LATITUDE_DEG)
    hour_angle = np.deg2rad(15.0 * (solar_hour - 12.0))
    sin_elev = (np.sin(lat) * np.sin(decl)
                + np.cos(lat) * np.cos(decl) * np.cos(hour_angle))
    clear_sky = 1100.0 * np.maximum(0.0, sin_elev) ** 1.15

    daily_cloud = np.clip(rng.normal(0.62, 0.22, 365), 0.12, 1.0)
    cloud = daily_cloud[doy] * np.clip(1.0 + 0.15 * _smooth_noise(rng, _HOURS, 1.0, 0.8),
                                       0.4, 1.3)
    ghi = clear_sky * cloud

    target_wh = ANNUAL_PANEL_KWH_PER_M2 / REFERENCE_EFFICIENCY * 1000.0
    ghi *= target_wh / ghi.sum()
    return WeatherSeries(grid, np.round(temp, 2), np.round(ghi, 2))


def build_prices() -> EnergyPrice:
    """Full-year hourly day-ahead style prices (stored as EUR/kWh)."""
    rng = np.random.default_rng(_SEED_PRICES)
    grid = hourly_grid_2017()
    hours = np.arange(_HOURS)
    doy = hours // 24
    hod = hours % 24
    weekday = (6 + doy) % 7  # 2017-01-01 was a Sunday

    base = 30.0 + 6.0 * np.cos(2 * np.pi * (doy - 20) / 365.0)
    night_dip = -9.0 * np.exp(-0.5 * ((hod - 3.5) / 2.4) ** 2)
    morning = 9.0 * np.exp(-0.5 * ((hod - 8.5) / 1.6) ** 2)
    evening = 11.0 * np.exp(-0.5 * ((hod - 18.5) / 2.0) ** 2)
    weekend = np.where(weekday >= 5, -4.0, 0.0)
    noise = _smooth_noise(rng, _HOURS, 2.5, 0.9)
    eur_mwh = np.clip(base + night_dip + morning + evening + weekend + noise, 0.5, None)
    return EnergyPrice(grid, np.round(eur_mwh, 2) / 1000.0)


def write_sample_data(out_dir) -> None:
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_weather(out / "weather_2017.csv", build_weather())
    write_prices(out / "prices_2017.csv", build_prices())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="write bundled sample weather/price CSVs")
    parser.add_argument("--out", default="sample_data")
    args = parser.parse_args(argv)
    write_sample_data(args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
