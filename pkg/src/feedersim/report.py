"""Experiment harness: baseline and steered runs, metrics, CSV reports.

A comparison runs the uncontrolled baseline plus one steered run per weight in
the config's alpha list on a single frozen scenario, then writes per-run CSV
directories and a summary table.  All outputs are byte-deterministic for
identical inputs: fixed run order, fixed column order, repr float formatting.
"""

from __future__ import annotations

import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .devices import (
    pv_profile, thermal_baseline_values, timeshiftable_baseline_values,
    vehicle_baseline_values,
)
from .errors import FeederSimError
from .feeder import FeederModel, default_feeder, evaluate_feeder
from .ingest import (
    ScenarioConfig, WeatherSeries, load_prices, load_scenario_config, load_weather,
)
from .profiles import EnergyPrice, Profile, TimeGrid
from .scenario import generate_scenario, save_scenario
from .steering import (
    CATEGORY_BUFFER_TS, CATEGORY_THERMAL, CATEGORY_TIMESHIFTABLE,
    SteeringResult, SteeringRunConfig, blockwise_distance_to_flat, prepare_household,
    run_steering, trace_to_csv,
)

CATEGORIES = ("uncontrollable", "timeshiftable", "buffer_ts", "battery", "thermal", "pv")

SUMMARY_HEADER = ("label,peak_w,losses_kwh,distance_w,cost_eur,"
                  "ev_peak_w,timeshiftable_peak_w,ev_to_ts_peak_ratio")


@dataclass
class RunReport:
    label: str
    grid: TimeGrid
    substation_w: np.ndarray = field(repr=False)
    losses_w: np.ndarray = field(repr=False)
    house_profiles: dict = field(repr=False)
    category_profiles: dict = field(repr=False)
    device_profiles: dict = field(repr=False)  # (house_id, key) -> values
    traces: list = field(default_factory=list, repr=False)
    runtime_s: float = 0.0

    @property
    def substation_peak_w(self) -> float:
        return float(np.abs(self.substation_w).max())

    @property
    def total_losses_kwh(self) -> float:
        return float(self.losses_w.sum()) * self.grid.dt_h / 1000.0

    def distance_to_flat_w(self, block_len: int) -> float:
        return blockwise_distance_to_flat(self.substation_w, block_len)

    def total_cost_eur(self, prices: EnergyPrice, export_price_factor: float = 1.0) -> float:
        house_sum = self.substation_w - self.losses_w
        energy_kwh = house_sum * self.grid.dt_h / 1000.0
        signed = np.where(energy_kwh >= 0.0, energy_kwh, energy_kwh * export_price_factor)
        return float(np.dot(prices.values, signed))

    @property
    def ev_peak_w(self) -> float:
        return float(np.abs(self.category_profiles["buffer_ts"]).max())

    @property
    def timeshiftable_peak_w(self) -> float:
        return float(np.abs(self.category_profiles["timeshiftable"]).max())

    @property
    def ev_to_ts_peak_ratio(self) -> float:
        ts = self.timeshiftable_peak_w
        return self.ev_peak_w / ts if ts > 0.0 else float("inf")


def _category_of_key(key: str) -> str:
    return {"ts": "timeshiftable", "veh": "buffer_ts", "battery": "battery",
            "thermal": "thermal"}[key.split(":", 1)[0]]


def _assemble_report(label, grid, households, weather, device_profiles, traces,
                     feeder, runtime_s) -> RunReport:
    """Compose house/category profiles from device plans and evaluate the feeder."""
    n = grid.n_intervals
    category_profiles = {c: np.zeros(n) for c in CATEGORIES}
    house_profiles = {}
    full_device_profiles = {}
    for house in households:
        total = house.base_load.values.copy()
        category_profiles["uncontrollable"] += house.base_load.values
        full_device_profiles[(house.id, "base")] = house.base_load.values
        if house.pv is not None:
            pv = pv_profile(house.pv.area_m2, house.pv.efficiency,
                            weather.ghi_wm2, grid).values
            total += pv
            category_profiles["pv"] += pv
            full_device_profiles[(house.id, "pv")] = pv
        for (hid, key), values in device_profiles.items():
            if hid != house.id:
                continue
            total += values
            category_profiles[_category_of_key(key)] += values
            full_device_profiles[(hid, key)] = values
        house_profiles[house.id] = total

    flow = evaluate_feeder(feeder, {hid: Profile(grid, v)
                                    for hid, v in house_profiles.items()})
    return RunReport(label, grid, flow.substation.values, flow.losses.values,
                     house_profiles, category_profiles, full_device_profiles,
                     traces, runtime_s)


def run_baseline(households, weather: WeatherSeries, prices: EnergyPrice,
                 feeder: FeederModel) -> RunReport:
    """Uncontrolled operation: devices start as soon as they become available."""
    started = time.perf_counter()
    grid = weather.grid
    n = grid.n_intervals
    dt_h = grid.dt_h
    device_profiles = {}
    for house in households:
        prepared = prepare_household(house, weather)
        for key, category, dev in prepared.devices:
            if category == CATEGORY_TIMESHIFTABLE:
                values = timeshiftable_baseline_values(dev, n)
            elif category == CATEGORY_BUFFER_TS:
                values = vehicle_baseline_values(dev, n, dt_h)
            elif category == CATEGORY_THERMAL:
                values = thermal_baseline_values(dev, dt_h)
            else:  # battery idles without steering
                values = np.zeros(n)
            device_profiles[(house.id, key)] = values
    return _assemble_report("baseline", grid, households, weather, device_profiles,
                            [], feeder, time.perf_counter() - started)


def run_steered(households, weather: WeatherSeries, prices: EnergyPrice,
                feeder: FeederModel, cfg: SteeringRunConfig) -> RunReport:
    started = time.perf_counter()
    result: SteeringResult = run_steering(households, weather, prices, cfg)
    label = f"alpha={cfg.alpha!r}"
    return _assemble_report(label, weather.grid, households, weather,
                            result.device_profiles, result.traces, feeder,
                            time.perf_counter() - started)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def _timestamps(grid: TimeGrid) -> list[str]:
    return [ts.strftime("%Y-%m-%dT%H:%M:%SZ") for ts in grid.timestamps()]


def _window_slice(grid: TimeGrid, window) -> slice:
    if window is None:
        return slice(0, grid.n_intervals)
    start, end = window
    i0 = grid.index_of(start)
    i1 = grid.index_of(end) + 1
    if i1 <= i0:
        raise FeederSimError("empty report window")
    return slice(i0, i1)


def write_run_csvs(report: RunReport, run_dir: Path, window=None) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    grid = report.grid
    sl = _window_slice(grid, window)
    stamps = _timestamps(grid)[sl]

    with open(run_dir / "substation.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("timestamp,power_w,losses_w\n")
        sub = report.substation_w[sl]
        loss = report.losses_w[sl]
        for i, ts in enumerate(stamps):
            fh.write(f"{ts},{_fmt(sub[i])},{_fmt(loss[i])}\n")

    with open(run_dir / "categories.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("timestamp,uncontrollable_w,timeshiftable_w,buffer_ts_w,"
                 "battery_w,thermal_w,pv_w\n")
        cols = [report.category_profiles[c][sl] for c in CATEGORIES]
        for i, ts in enumerate(stamps):
            fh.write(ts + "," + ",".join(_fmt(col[i]) for col in cols) + "\n")

    houses_dir = run_dir / "houses"
    houses_dir.mkdir(exist_ok=True)
    by_house = {}
    for (hid, key), values in report.device_profiles.items():
        by_house.setdefault(hid, []).append((key, values))
    for hid in sorted(by_house):
        columns = sorted(by_house[hid], key=lambda kv: _house_column_order(kv[0]))
        names = ",".join(_column_name(key) for key, _ in columns)
        with open(houses_dir / f"house_{hid:02d}.csv", "w", encoding="utf-8",
                  newline="\n") as fh:
            fh.write(f"timestamp,{names}\n")
            sliced = [values[sl] for _, values in columns]
            for i, ts in enumerate(stamps):
                fh.write(ts + "," + ",".join(_fmt(col[i]) for col in sliced) + "\n")

    if report.traces:
        (run_dir / "trace.csv").write_text(trace_to_csv(report.traces),
                                           encoding="utf-8")


def _house_column_order(key: str) -> tuple:
    order = {"base": 0, "ts": 1, "veh": 2, "thermal": 3, "battery": 4, "pv": 5}
    head = key.split(":", 1)[0]
    return (order.get(head, 9), key)


def _column_name(key: str) -> str:
    if key in ("base", "pv"):
        return f"{key}_w"
    head, label, idx = key.split(":")
    if head == "ts":
        return f"ts_{label}_w"
    if head == "veh":
        return f"veh_{label}_w"
    return f"{head}_w"


def summary_rows(reports, prices: EnergyPrice, config: ScenarioConfig) -> list[str]:
    rows = [SUMMARY_HEADER]
    for r in reports:
        ratio = r.ev_to_ts_peak_ratio
        rows.append(",".join([
            r.label,
            _fmt(r.substation_peak_w),
            _fmt(r.total_losses_kwh),
            _fmt(r.distance_to_flat_w(config.block_len)),
            _fmt(r.total_cost_eur(prices, config.export_price_factor)),
            _fmt(r.ev_peak_w),
            _fmt(r.timeshiftable_peak_w),
            "inf" if ratio == float("inf") else _fmt(ratio),
        ]))
    return rows


def run_label_dir(label: str) -> str:
    return label.replace("=", "_")


def run_comparison_data(config: ScenarioConfig, households, weather: WeatherSeries,
                        prices: EnergyPrice, feeder: FeederModel) -> list[RunReport]:
    """Baseline plus one steered run per configured alpha, fixed order."""
    reports = [run_baseline(households, weather, prices, feeder)]
    for alpha in config.alphas:
        cfg = SteeringRunConfig(alpha=alpha, block_len=config.block_len,
                                epsilon_w=config.epsilon_w, max_iters=config.max_iters,
                                split_deviation=config.split_deviation)
        reports.append(run_steered(households, weather, prices, feeder, cfg))
    return reports


def run_comparison(config_path, weather_path, price_path, out_dir,
                   window=None) -> list[RunReport]:
    """Full comparison from input files; writes per-run CSVs and summary.csv.

    All simulation work happens before anything is written, so a failing run
    leaves no partial outputs behind.
    """
    config = load_scenario_config(config_path)
    grid = config.grid()
    weather = load_weather(weather_path, grid)
    prices = load_prices(price_path, grid)
    households = generate_scenario(config, weather, np.random.default_rng(config.seed))
    feeder = default_feeder(config.n_houses, config.feeder.segment_resistance_ohm,
                            config.feeder.v_nominal_v)
    reports = run_comparison_data(config, households, weather, prices, feeder)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    created = []
    try:
        scenario_path = out / "scenario.json"
        save_scenario(scenario_path, config, households)
        created.append(scenario_path)
        for report in reports:
            run_dir = out / run_label_dir(report.label)
            created.append(run_dir)
            write_run_csvs(report, run_dir, window)
        summary_path = out / "summary.csv"
        summary_path.write_text("\n".join(summary_rows(reports, prices, config)) + "\n",
                                encoding="utf-8")
        created.append(summary_path)
    except BaseException:
        for path in created:
            if path.is_dir():
                shutil.rmtree(path, ignore_errors=True)
            elif path.exists():
                path.unlink()
        raise
    return reports
