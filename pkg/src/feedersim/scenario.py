"""Seeded synthetic scenario generation: households, base loads, devices.

Generation is a single RNG stream with a fixed draw order, so identical
(config, weather, seed) inputs reproduce identical scenarios byte for byte.
Device placement uses deterministic rounding: floor(n * penetration) houses
get a device, chosen by a seeded shuffle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .devices import (
    Buffer, BufferTimeShiftable, ChargingSession, Job, PvPanel, TimeShiftable,
)
from .errors import DataError
from .ingest import ScenarioConfig, WeatherSeries, config_from_dict, config_to_dict
from .profiles import Profile, TimeGrid

OCCUPANCY_TYPES = ("single", "couple", "family")

INTERVALS_PER_DAY = 96  # the generator assumes the default 900 s resolution


@dataclass
class TruncGauss:
    """Gaussian parameters with hard truncation bounds."""

    mean: float
    sd: float
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("TruncGauss lo must not exceed hi")
        if self.sd < 0:
            raise ValueError("TruncGauss sd must be non-negative")


def sample_trunc_gauss(params: TruncGauss, rng: np.random.Generator) -> float:
    """Rejection-sample a normal onto [lo, hi]; clip the draw if 1000 tries miss."""
    draw = params.mean
    for _ in range(1000):
        draw = float(rng.normal(params.mean, params.sd))
        if params.lo <= draw <= params.hi:
            return draw
    return float(min(max(draw, params.lo), params.hi))


@dataclass
class HeatPumpSpec:
    """Heat pump parameters; the thermal demand series is derived from weather."""

    cop: float
    max_power_w: float
    store_kwh_th: float
    store0_kwh: float
    heat_coeff_kw_per_k: float
    indoor_base_c: float

    def demand_kwh(self, temperature_c: np.ndarray, dt_h: float) -> np.ndarray:
        """Per-interval thermal drain: coeff * max(0, base - outdoor) * dt."""
        deficit = np.maximum(0.0, self.indoor_base_c - temperature_c)
        return self.heat_coeff_kw_per_k * deficit * dt_h


@dataclass
class Household:
    id: int
    occupancy_type: str
    annual_kwh: float
    base_load: Profile
    timeshiftables: list[TimeShiftable] = field(default_factory=list)
    vehicles: list[BufferTimeShiftable] = field(default_factory=list)
    battery: Buffer | None = None
    heatpump: HeatPumpSpec | None = None
    pv: PvPanel | None = None


# ---------------------------------------------------------------------------
# Occupancy day templates (relative power shapes, 96 intervals)
# ---------------------------------------------------------------------------

def _bump(hours, center, width, amp):
    return amp * np.exp(-0.5 * ((hours - center) / width) ** 2)


def _day_template(occupancy_type: str, weekend: bool) -> np.ndarray:
    h = (np.arange(INTERVALS_PER_DAY) + 0.5) * 24.0 / INTERVALS_PER_DAY
    base = {"single": 0.10, "couple": 0.13, "family": 0.16}[occupancy_type]
    shape = np.full(INTERVALS_PER_DAY, base)
    if occupancy_type == "single":
        shape += _bump(h, 7.8, 0.9, 0.25) + _bump(h, 19.5, 2.0, 0.55)
    elif occupancy_type == "couple":
        shape += _bump(h, 7.2, 1.0, 0.40) + _bump(h, 18.8, 2.2, 0.75)
    else:
        shape += (_bump(h, 7.0, 1.2, 0.55) + _bump(h, 16.5, 1.5, 0.35)
                  + _bump(h, 19.3, 2.3, 0.95))
    if weekend:
        shape += _bump(h, 12.5, 3.0, 0.30 if occupancy_type == "family" else 0.18)
    return shape


_TEMPLATES = {
    (kind, weekend): _day_template(kind, weekend)
    for kind in OCCUPANCY_TYPES for weekend in (False, True)
}


def _base_load(occupancy_type, annual_kwh, n_days, first_weekday, jitter_sd, rng,
               grid: TimeGrid) -> Profile:
    """Day templates with per-day multiplicative jitter, rescaled to the horizon
    share of annual_kwh (the full year gets exactly annual_kwh)."""
    jitter = TruncGauss(1.0, jitter_sd, max(0.1, 1.0 - 3.0 * jitter_sd),
                        1.0 + 3.0 * jitter_sd)
    days = []
    for d in range(n_days):
        weekend = (first_weekday + d) % 7 >= 5
        factor = sample_trunc_gauss(jitter, rng)
        days.append(_TEMPLATES[(occupancy_type, weekend)] * factor)
    values = np.concatenate(days)[:grid.n_intervals]
    horizon_share = grid.n_intervals * grid.dt_h / (365.0 * 24.0)
    total_kwh = values.sum() * grid.dt_h / 1000.0
    values *= annual_kwh * horizon_share / total_kwh
    return Profile(grid, values)


# ---------------------------------------------------------------------------
# Scenario generation
# ---------------------------------------------------------------------------

def _placement(rng, n, fraction):
    count = int(np.floor(n * fraction))
    order = rng.permutation(n)
    return set(int(i) for i in order[:count])


def _appliance_jobs(rng, params, day_indices, n_intervals, dt_h):
    """One job per listed day, window sampled to fit inside that day."""
    power_w = params.energy_kwh * 1000.0 / params.duration_h
    length = int(round(params.duration_h / dt_h))
    shape = np.full(length, power_w)
    jobs = []
    for day in day_indices:
        window = int(round(float(rng.uniform(params.window_lo_h, params.window_hi_h)) / dt_h))
        window = max(window, length)
        day_start = day * INTERVALS_PER_DAY
        es_rel = int(rng.integers(0, INTERVALS_PER_DAY - window + 1))
        earliest = day_start + es_rel
        deadline = earliest + window - 1
        if deadline >= n_intervals:
            continue
        jobs.append(Job(shape.copy(), earliest, deadline))
    return jobs


def _vehicle_sessions(rng, cfg, veh_params, n_days, first_weekday, n_intervals, dt_h):
    sp = cfg.devices.session
    arrival_tg = TruncGauss(sp.arrival_mean_min, sp.arrival_sd_min,
                            sp.arrival_mean_min - 2 * sp.arrival_sd_min,
                            sp.arrival_mean_min + 2 * sp.arrival_sd_min)
    departure_tg = TruncGauss(sp.departure_mean_min, sp.departure_sd_min,
                              sp.departure_mean_min - 2 * sp.departure_sd_min,
                              sp.departure_mean_min + 2 * sp.departure_sd_min)
    energy_tg = TruncGauss(veh_params.energy_mean_kwh, veh_params.energy_sd_kwh,
                           veh_params.energy_lo_kwh,
                           veh_params.energy_hi_frac * veh_params.capacity_kwh)
    sessions = []
    for day in range(n_days):
        if (first_weekday + day) % 7 >= 5:  # commuting pattern: weekday arrivals only
            continue
        arr_min = sample_trunc_gauss(arrival_tg, rng)
        dep_min = sample_trunc_gauss(departure_tg, rng)
        arrival = day * INTERVALS_PER_DAY + int(round(arr_min / 15.0))
        departure = (day + 1) * INTERVALS_PER_DAY + int(round(dep_min / 15.0))
        required = sample_trunc_gauss(energy_tg, rng)
        if departure > n_intervals or arrival >= departure:
            continue
        # never exceed what the charger can deliver in the window
        max_kwh = veh_params.max_power_w * (departure - arrival) * dt_h / 1000.0
        required = min(required, 0.98 * max_kwh)
        sessions.append(ChargingSession(arrival, departure, required))
    return sessions


def generate_scenario(config: ScenarioConfig, weather: WeatherSeries,
                      rng: np.random.Generator) -> list[Household]:
    """Generate the household list for one experiment; deterministic in (config, weather, rng)."""
    grid = config.grid()
    if weather.grid != grid:
        raise DataError("weather series is not on the scenario grid")
    if grid.interval_s != 900:
        raise DataError("scenario generation assumes 900 s intervals")

    n = config.n_houses
    dt_h = grid.dt_h
    n_days = (grid.n_intervals + INTERVALS_PER_DAY - 1) // INTERVALS_PER_DAY
    first_weekday = grid.start.weekday()
    dev = config.devices

    pv_set = _placement(rng, n, config.penetration_pv)
    battery_set = _placement(rng, n, config.penetration_battery)
    heatpump_set = _placement(rng, n, config.penetration_heatpump)
    owners = sorted(_placement(rng, n, config.vehicle_ownership))
    owner_set = set(owners)
    owner_order = rng.permutation(len(owners))
    n_ev = int(np.floor(len(owners) * config.vehicle_split_ev))
    ev_set = set(owners[int(i)] for i in owner_order[:n_ev])

    # annual thermal need per unit heating coefficient, from this weather
    ak = dev.annual_kwh
    annual_params = {
        "single": TruncGauss(ak.single_mean, ak.single_sd,
                             ak.single_mean - 2 * ak.single_sd, ak.single_mean + 2 * ak.single_sd),
        "couple": TruncGauss(ak.couple_mean, ak.couple_sd,
                             ak.couple_mean - 2 * ak.couple_sd, ak.couple_mean + 2 * ak.couple_sd),
        "family": TruncGauss(ak.family_mean, ak.family_sd,
                             ak.family_mean - 2 * ak.family_sd, ak.family_mean + 2 * ak.family_sd),
    }
    hp = dev.heatpump
    degree_kh = float(np.maximum(0.0, hp.indoor_base_c - weather.temperature_c).sum()) * dt_h
    # heating coefficient is calibrated against a full year; extrapolate the
    # horizon's degree-hours to annual scale so short horizons stay plausible
    horizon_h = grid.n_intervals * dt_h
    annual_degree_kh = degree_kh * (8760.0 / horizon_h) if degree_kh > 0 else 1e5
    hp_scale = {"single": hp.scale_single, "couple": hp.scale_couple,
                "family": hp.scale_family}

    households = []
    for i in range(n):
        occupancy = OCCUPANCY_TYPES[int(rng.choice(3, p=config.occupancy_shares))]
        annual_kwh = sample_trunc_gauss(annual_params[occupancy], rng)
        base = _base_load(occupancy, annual_kwh, n_days, first_weekday,
                          config.base_jitter_sd, rng, grid)

        timeshiftables = [
            TimeShiftable("dishwasher", _appliance_jobs(
                rng, dev.dishwasher, range(n_days), grid.n_intervals, dt_h)),
            TimeShiftable("washer", _appliance_jobs(
                rng, dev.washer, _washer_days(rng, n_days, dev.washer_jobs_per_week),
                grid.n_intervals, dt_h)),
        ]

        vehicles = []
        if i in owner_set:
            kind, params = ("ev", dev.ev) if i in ev_set else ("phev", dev.phev)
            veh = BufferTimeShiftable(kind, params.capacity_kwh, params.max_power_w,
                                      _vehicle_sessions(rng, config, params, n_days,
                                                        first_weekday, grid.n_intervals,
                                                        dt_h))
            veh.validate_sessions(dt_h)
            vehicles.append(veh)

        battery = None
        if i in battery_set:
            capacity = float(rng.uniform(dev.battery.capacity_lo_kwh,
                                         dev.battery.capacity_hi_kwh))
            battery = Buffer(capacity, dev.battery.max_power_w,
                             dev.battery.soc0_frac * capacity, dev.battery.efficiency)

        heatpump = None
        if i in heatpump_set:
            coeff = hp.annual_heat_kwh_family * hp_scale[occupancy] / annual_degree_kh
            heatpump = HeatPumpSpec(hp.cop, hp.max_power_w, hp.store_kwh_th,
                                    hp.store0_frac * hp.store_kwh_th, coeff,
                                    hp.indoor_base_c)

        pv = None
        if i in pv_set:
            area = sample_trunc_gauss(TruncGauss(dev.pv.area_mean_m2, dev.pv.area_sd_m2,
                                                 dev.pv.area_lo_m2, dev.pv.area_hi_m2), rng)
            efficiency = float(rng.uniform(dev.pv.efficiency_lo, dev.pv.efficiency_hi))
            pv = PvPanel(area, efficiency)

        households.append(Household(i, occupancy, annual_kwh, base,
                                    timeshiftables, vehicles, battery, heatpump, pv))
    return households


def _washer_days(rng, n_days, jobs_per_week):
    days = []
    for week in range((n_days + 6) // 7):
        picks = sorted(int(d) for d in rng.choice(7, size=min(jobs_per_week, 7),
                                                  replace=False))
        days.extend(week * 7 + d for d in picks if week * 7 + d < n_days)
    return days


# ---------------------------------------------------------------------------
# scenario.json serialization
# ---------------------------------------------------------------------------

def _job_to_dict(job: Job) -> dict:
    first = float(job.shape_w[0])
    if np.all(job.shape_w == first):
        body = {"power_w": first, "n_intervals": int(job.shape_w.size)}
    else:
        body = {"shape_w": [float(v) for v in job.shape_w]}
    body["earliest_start"] = int(job.earliest_start)
    body["deadline"] = int(job.deadline)
    return body


def _job_from_dict(data: dict) -> Job:
    if "shape_w" in data:
        shape = np.asarray(data["shape_w"], dtype=float)
    else:
        shape = np.full(int(data["n_intervals"]), float(data["power_w"]))
    return Job(shape, int(data["earliest_start"]), int(data["deadline"]))


def household_to_dict(house: Household) -> dict:
    devices = []
    for ts in house.timeshiftables:
        devices.append({"kind": "timeshiftable", "label": ts.label,
                        "jobs": [_job_to_dict(j) for j in ts.jobs]})
    for veh in house.vehicles:
        devices.append({"kind": "vehicle", "label": veh.label,
                        "capacity_kwh": veh.capacity_kwh,
                        "max_power_w": veh.max_power_w,
                        "sessions": [{"arrival": s.arrival, "departure": s.departure,
                                      "required_kwh": s.required_kwh}
                                     for s in veh.sessions]})
    if house.heatpump is not None:
        h = house.heatpump
        devices.append({"kind": "heatpump", "cop": h.cop, "max_power_w": h.max_power_w,
                        "store_kwh_th": h.store_kwh_th, "store0_kwh": h.store0_kwh,
                        "heat_coeff_kw_per_k": h.heat_coeff_kw_per_k,
                        "indoor_base_c": h.indoor_base_c})
    if house.battery is not None:
        b = house.battery
        devices.append({"kind": "battery", "capacity_kwh": b.capacity_kwh,
                        "max_power_w": b.max_power_w, "soc0_kwh": b.soc0_kwh,
                        "efficiency": b.efficiency})
    if house.pv is not None:
        devices.append({"kind": "pv", "area_m2": house.pv.area_m2,
                        "efficiency": house.pv.efficiency})
    return {"id": house.id, "occupancy_type": house.occupancy_type,
            "annual_kwh": house.annual_kwh,
            "base_load_w": [float(v) for v in house.base_load.values],
            "devices": devices}


def household_from_dict(data: dict, grid: TimeGrid) -> Household:
    house = Household(int(data["id"]), data["occupancy_type"], float(data["annual_kwh"]),
                      Profile(grid, np.asarray(data["base_load_w"], dtype=float)))
    for d in data["devices"]:
        kind = d["kind"]
        if kind == "timeshiftable":
            house.timeshiftables.append(
                TimeShiftable(d["label"], [_job_from_dict(j) for j in d["jobs"]]))
        elif kind == "vehicle":
            house.vehicles.append(BufferTimeShiftable(
                d["label"], float(d["capacity_kwh"]), float(d["max_power_w"]),
                [ChargingSession(int(s["arrival"]), int(s["departure"]),
                                 float(s["required_kwh"])) for s in d["sessions"]]))
        elif kind == "heatpump":
            house.heatpump = HeatPumpSpec(float(d["cop"]), float(d["max_power_w"]),
                                          float(d["store_kwh_th"]), float(d["store0_kwh"]),
                                          float(d["heat_coeff_kw_per_k"]),
                                          float(d["indoor_base_c"]))
        elif kind == "battery":
            house.battery = Buffer(float(d["capacity_kwh"]), float(d["max_power_w"]),
                                   float(d["soc0_kwh"]), float(d["efficiency"]))
        elif kind == "pv":
            house.pv = PvPanel(float(d["area_m2"]), float(d["efficiency"]))
        else:
            raise DataError(f"unknown device kind '{kind}' in scenario file")
    return house


def scenario_to_json(config: ScenarioConfig, households: list[Household]) -> str:
    grid = config.grid()
    doc = {
        "format": "feedersim-scenario-v1",
        "config": config_to_dict(config),
        "grid": {"start": config.start, "interval_s": grid.interval_s,
                 "n_intervals": grid.n_intervals},
        "households": [household_to_dict(h) for h in households],
    }
    return json.dumps(doc, indent=None, separators=(",", ":")) + "\n"


def save_scenario(path, config: ScenarioConfig, households: list[Household]) -> None:
    Path(path).write_text(scenario_to_json(config, households), encoding="utf-8")


def load_scenario(path) -> tuple[ScenarioConfig, list[Household]]:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"scenario file not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"scenario parse error in {p}: {exc}") from None
    if doc.get("format") != "feedersim-scenario-v1":
        raise DataError(f"{p}: not a feedersim scenario file")
    config = config_from_dict(doc["config"])
    grid = config.grid()
    households = [household_from_dict(h, grid) for h in doc["households"]]
    return config, households
