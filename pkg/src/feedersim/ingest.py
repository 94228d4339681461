"""File ingestion: weather and price CSVs, scenario configuration.

Formats are fixed and strict so that experiments are reproducible:

* weather CSV   header ``timestamp,temperature_c,ghi_wm2``
* price CSV     header ``timestamp,price_eur_mwh`` (converted to EUR/kWh)
* config        JSON object; unknown keys are rejected

Timestamps are ISO-8601 UTC, strictly increasing, uniformly spaced except
for gaps of at most 4 missing source rows (filled by linear interpolation).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import DataError
from .profiles import EnergyPrice, TimeGrid

MAX_GAP_ROWS = 4
TEMP_SANITY_C = (-60.0, 60.0)


# ---------------------------------------------------------------------------
# Scenario configuration
# ---------------------------------------------------------------------------

@dataclass
class VehicleParams:
    capacity_kwh: float
    max_power_w: float
    energy_mean_kwh: float
    energy_sd_kwh: float
    energy_lo_kwh: float
    energy_hi_frac: float = 0.9


@dataclass
class SessionParams:
    """Overnight charging session timing, minutes from midnight, truncated at 2 sigma."""

    arrival_mean_min: float = 1050.0   # 17:30
    arrival_sd_min: float = 60.0
    departure_mean_min: float = 480.0  # 08:00 next day
    departure_sd_min: float = 30.0


@dataclass
class PvParams:
    efficiency_lo: float = 0.15
    efficiency_hi: float = 0.20
    area_mean_m2: float = 15.0
    area_sd_m2: float = 4.0
    area_lo_m2: float = 8.0
    area_hi_m2: float = 25.0


@dataclass
class BatteryParams:
    capacity_lo_kwh: float = 2.0
    capacity_hi_kwh: float = 12.0
    max_power_w: float = 3700.0
    efficiency: float = 1.0
    soc0_frac: float = 0.5


@dataclass
class HeatPumpParams:
    cop: float = 3.0
    max_power_w: float = 2000.0
    store_kwh_th: float = 10.0
    store0_frac: float = 0.5
    annual_heat_kwh_family: float = 10000.0
    indoor_base_c: float = 17.0
    scale_single: float = 0.6
    scale_couple: float = 0.8
    scale_family: float = 1.0


@dataclass
class ApplianceParams:
    energy_kwh: float
    duration_h: float
    window_lo_h: float = 8.0
    window_hi_h: float = 12.0


@dataclass
class AnnualKwhParams:
    single_mean: float = 2000.0
    single_sd: float = 400.0
    couple_mean: float = 3500.0
    couple_sd: float = 700.0
    family_mean: float = 5000.0
    family_sd: float = 1000.0


@dataclass
class DeviceParams:
    ev: VehicleParams = field(default_factory=lambda: VehicleParams(
        capacity_kwh=42.0, max_power_w=7400.0,
        energy_mean_kwh=10.0, energy_sd_kwh=3.0, energy_lo_kwh=4.0))
    phev: VehicleParams = field(default_factory=lambda: VehicleParams(
        capacity_kwh=12.0, max_power_w=3700.0,
        energy_mean_kwh=6.0, energy_sd_kwh=2.0, energy_lo_kwh=2.0))
    session: SessionParams = field(default_factory=SessionParams)
    pv: PvParams = field(default_factory=PvParams)
    battery: BatteryParams = field(default_factory=BatteryParams)
    heatpump: HeatPumpParams = field(default_factory=HeatPumpParams)
    dishwasher: ApplianceParams = field(default_factory=lambda: ApplianceParams(
        energy_kwh=1.0, duration_h=2.0))
    washer: ApplianceParams = field(default_factory=lambda: ApplianceParams(
        energy_kwh=0.8, duration_h=1.5))
    washer_jobs_per_week: int = 4
    annual_kwh: AnnualKwhParams = field(default_factory=AnnualKwhParams)


@dataclass
class FeederParams:
    segment_resistance_ohm: float = 0.05
    v_nominal_v: float = 230.0


@dataclass
class ScenarioConfig:
    """Everything needed to generate and run one experiment family."""

    seed: int = 42
    n_houses: int = 10
    start: str = "2017-01-01T00:00:00Z"
    interval_s: int = 900
    n_intervals: int = 35040
    penetration_pv: float = 0.5
    penetration_battery: float = 0.5
    penetration_heatpump: float = 0.5
    vehicle_ownership: float = 1.0
    vehicle_split_ev: float = 0.5
    export_price_factor: float = 1.0
    occupancy_shares: list[float] = field(default_factory=lambda: [0.3, 0.4, 0.3])
    base_jitter_sd: float = 0.15
    block_len: int = 96
    epsilon_w: float = 1.0
    max_iters: int = 100
    split_deviation: bool = False
    alphas: list[float] = field(default_factory=lambda: [1.0, 0.5, 0.0])
    devices: DeviceParams = field(default_factory=DeviceParams)
    feeder: FeederParams = field(default_factory=FeederParams)

    def grid(self) -> TimeGrid:
        return TimeGrid(parse_timestamp(self.start, "config start"),
                        self.interval_s, self.n_intervals)

    def validate(self) -> None:
        if self.n_houses < 1:
            raise DataError("n_houses must be >= 1")
        for name in ("penetration_pv", "penetration_battery", "penetration_heatpump",
                     "vehicle_ownership", "vehicle_split_ev"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DataError(f"{name} must be in [0, 1], got {v}")
        for a in self.alphas:
            if not 0.0 <= a <= 1.0:
                raise DataError(f"alpha must be in [0, 1], got {a}")
        if len(self.occupancy_shares) != 3 or abs(sum(self.occupancy_shares) - 1.0) > 1e-9:
            raise DataError("occupancy_shares must be three fractions summing to 1")
        if self.block_len < 1:
            raise DataError("block_len must be >= 1")
        if self.epsilon_w <= 0:
            raise DataError("epsilon_w must be > 0")
        if self.max_iters < 1:
            raise DataError("max_iters must be >= 1")
        if self.export_price_factor < 0:
            raise DataError("export_price_factor must be >= 0")
        if self.feeder.segment_resistance_ohm <= 0 or self.feeder.v_nominal_v <= 0:
            raise DataError("feeder parameters must be positive")
        if self.interval_s <= 0 or self.n_intervals <= 0:
            raise DataError("grid parameters must be positive")


def _apply_overrides(obj, data: dict, path: str) -> None:
    """Merge a JSON object onto a default dataclass instance, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise DataError(f"{path or 'config'}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(obj)}
    for key, raw in data.items():
        if key not in fields:
            raise DataError(f"unknown config key '{path + key}'")
        f = fields[key]
        if f.type in _NESTED:
            _apply_overrides(getattr(obj, key), raw, path + key + ".")
        else:
            setattr(obj, key, _coerce(raw, f.type, path + key))


# dataclass field types are strings under `from __future__ import annotations`
_NESTED = {
    "DeviceParams": DeviceParams, "FeederParams": FeederParams,
    "VehicleParams": VehicleParams, "SessionParams": SessionParams,
    "PvParams": PvParams, "BatteryParams": BatteryParams,
    "HeatPumpParams": HeatPumpParams, "ApplianceParams": ApplianceParams,
    "AnnualKwhParams": AnnualKwhParams,
}


def _coerce(raw, type_name: str, path: str):
    if type_name == "int":
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise DataError(f"{path}: expected integer")
        return raw
    if type_name == "float":
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise DataError(f"{path}: expected number")
        return float(raw)
    if type_name == "bool":
        if not isinstance(raw, bool):
            raise DataError(f"{path}: expected boolean")
        return raw
    if type_name == "str":
        if not isinstance(raw, str):
            raise DataError(f"{path}: expected string")
        return raw
    if type_name.startswith("list[float]"):
        if not isinstance(raw, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw):
            raise DataError(f"{path}: expected list of numbers")
        return [float(v) for v in raw]
    raise DataError(f"{path}: unsupported config value")


def load_scenario_config(path) -> ScenarioConfig:
    """Parse a JSON config file; `{}` yields all defaults."""
    p = Path(path)
    if not p.is_file():
        raise DataError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"config parse error in {p}: {exc}") from None
    cfg = config_from_dict(data)
    return cfg


def config_from_dict(data: dict) -> ScenarioConfig:
    cfg = ScenarioConfig()
    _apply_overrides(cfg, data, "")
    cfg.validate()
    for veh, name in ((cfg.devices.ev, "devices.ev"), (cfg.devices.phev, "devices.phev")):
        if veh.capacity_kwh <= 0 or veh.max_power_w <= 0:
            raise DataError(f"{name}: capacity and power must be positive")
    return cfg


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return dataclasses.asdict(cfg)


# ---------------------------------------------------------------------------
# Time-series CSV loading
# ---------------------------------------------------------------------------

def parse_timestamp(text: str, context: str) -> datetime:
    try:
        ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise DataError(f"{context}: bad timestamp '{text}'") from None
    if ts.tzinfo is None:
        raise DataError(f"{context}: timestamp '{text}' lacks a UTC offset")
    return ts.astimezone(timezone.utc)


def _read_uniform_csv(path, expected_header: str):
    """Read a strict CSV, fill small gaps, return (start_epoch, step_s, columns)."""
    p = Path(path)
    if not p.is_file():
        raise DataError(f"file not found: {p}")
    with open(p, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != expected_header:
        raise DataError(f"{p}: expected header '{expected_header}'")
    n_cols = expected_header.count(",")
    epochs: list[float] = []
    cols: list[list[float]] = [[] for _ in range(n_cols)]
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != n_cols + 1:
            raise DataError(f"{p} line {lineno}: expected {n_cols + 1} fields")
        ts = parse_timestamp(parts[0], f"{p} line {lineno}")
        epochs.append(ts.timestamp())
        for i, cell in enumerate(parts[1:]):
            try:
                val = float(cell)
            except ValueError:
                raise DataError(f"{p} line {lineno}: bad number '{cell}'") from None
            if not np.isfinite(val):
                raise DataError(f"{p} line {lineno}: non-finite value")
            cols[i].append(val)
    if len(epochs) < 2:
        raise DataError(f"{p}: need at least two data rows")

    t = np.asarray(epochs)
    diffs = np.diff(t)
    if np.any(diffs <= 0):
        bad = int(np.argmax(diffs <= 0)) + 3
        raise DataError(f"{p} line {bad}: timestamps must be strictly increasing")
    step = float(diffs.min())
    ratios = diffs / step
    if np.any(np.abs(ratios - np.round(ratios)) > 1e-6):
        raise DataError(f"{p}: timestamps are not uniformly spaced")
    ratios = np.round(ratios).astype(int)
    if np.any(ratios - 1 > MAX_GAP_ROWS):
        bad = int(np.argmax(ratios - 1 > MAX_GAP_ROWS)) + 3
        raise DataError(f"{p} line {bad}: gap exceeds limit of {MAX_GAP_ROWS} source intervals")

    values = [np.asarray(c) for c in cols]
    if np.any(ratios > 1):
        # fill gaps by linear interpolation onto the uniform step
        n_out = int(ratios.sum()) + 1
        idx_out = np.arange(n_out, dtype=float)
        idx_src = np.concatenate(([0.0], np.cumsum(ratios).astype(float)))
        values = [np.interp(idx_out, idx_src, v) for v in values]
    return float(t[0]), int(round(step)), values


def _project(values: np.ndarray, src_start: float, src_step: int, grid: TimeGrid) -> np.ndarray:
    """Project a uniform source series onto the target grid.

    Coarser source -> hold each value; finer source -> mean over each target
    interval. Grid start must align with the source sampling.
    """
    tgt_start = grid.start.timestamp()
    tgt_step = grid.interval_s
    src_end = src_start + src_step * len(values)
    tgt_end = tgt_start + tgt_step * grid.n_intervals
    if tgt_start < src_start - 1e-9 or tgt_end > src_end + 1e-9:
        raise DataError("coverage shorter than target grid")
    offset = tgt_start - src_start
    if abs(offset - round(offset / src_step) * src_step) > 1e-6:
        raise DataError("target grid start is not aligned with the source sampling")
    first = int(round(offset / src_step))

    if src_step == tgt_step:
        return values[first:first + grid.n_intervals].copy()
    if src_step > tgt_step:
        if src_step % tgt_step:
            raise DataError("incompatible resolution: source interval is not a "
                            "multiple of the target interval")
        m = src_step // tgt_step
        n_src = -(-grid.n_intervals // m)  # ceil
        held = np.repeat(values[first:first + n_src], m)
        return held[:grid.n_intervals].copy()
    if tgt_step % src_step:
        raise DataError("incompatible resolution: target interval is not a "
                        "multiple of the source interval")
    m = tgt_step // src_step
    window = values[first:first + grid.n_intervals * m]
    return window.reshape(grid.n_intervals, m).mean(axis=1)


@dataclass
class WeatherSeries:
    grid: TimeGrid
    temperature_c: np.ndarray = field(repr=False)
    ghi_wm2: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name, arr in (("temperature_c", self.temperature_c), ("ghi_wm2", self.ghi_wm2)):
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != (self.grid.n_intervals,):
                raise DataError(f"{name}: length does not match grid")
            setattr(self, name, arr)
        if np.any(self.ghi_wm2 < 0):
            raise DataError("ghi_wm2 must be non-negative")
        lo, hi = TEMP_SANITY_C
        if np.any(self.temperature_c < lo) or np.any(self.temperature_c > hi):
            raise DataError(f"temperature outside sanity band [{lo}, {hi}] degC")


def load_weather(path, target_grid: TimeGrid) -> WeatherSeries:
    """Load a weather CSV and project it onto `target_grid`."""
    src_start, src_step, (temp, ghi) = _read_uniform_csv(
        path, "timestamp,temperature_c,ghi_wm2")
    return WeatherSeries(
        target_grid,
        _project(temp, src_start, src_step, target_grid),
        _project(ghi, src_start, src_step, target_grid),
    )


def load_prices(path, target_grid: TimeGrid) -> EnergyPrice:
    """Load an hourly day-ahead price CSV (EUR/MWh) as EUR/kWh on `target_grid`."""
    src_start, src_step, (eur_mwh,) = _read_uniform_csv(path, "timestamp,price_eur_mwh")
    return EnergyPrice(target_grid, _project(eur_mwh, src_start, src_step, target_grid) / 1000.0)


# ---------------------------------------------------------------------------
# Canonical writers (round-trip exact with the loaders above)
# ---------------------------------------------------------------------------

def _iso(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def write_weather(path, weather: WeatherSeries) -> None:
    g = weather.grid
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("timestamp,temperature_c,ghi_wm2\n")
        for i in range(g.n_intervals):
            fh.write(f"{_iso(g.timestamp_of(i))},{float(weather.temperature_c[i])!r},"
                     f"{float(weather.ghi_wm2[i])!r}\n")


def _mwh_repr(kwh: float) -> str:
    """EUR/MWh text whose reload (divide by 1000) reproduces `kwh` bit-exactly."""
    v = kwh * 1000.0
    if v / 1000.0 == kwh:
        return repr(v)
    # *1000 then /1000 is not always an identity; nudge within 2 ulps
    for direction in (np.inf, -np.inf):
        cand = v
        for _ in range(2):
            cand = float(np.nextafter(cand, direction))
            if cand / 1000.0 == kwh:
                return repr(cand)
    return repr(v)


def write_prices(path, prices: EnergyPrice) -> None:
    g = prices.grid
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("timestamp,price_eur_mwh\n")
        for i in range(g.n_intervals):
            fh.write(f"{_iso(g.timestamp_of(i))},{_mwh_repr(float(prices.values[i]))}\n")
