"""Profile steering coordinator.

The horizon is cut into planning blocks (default 24 h).  Within a block:

* initialization: every household plans its devices once, against a signal
  that would flatten its own uncontrollable net load;
* iteration: each round, every household proposes a replanning against the
  current aggregate deviation from flat; only the single best improvement is
  committed, and the loop stops when no household improves the aggregate's
  Euclidean distance to flat by at least epsilon_w (or at max_iters).

Committed block plans are concatenated into full-horizon profiles.  Storage
state (battery SoC, thermal store) carries across block boundaries; overnight
charging sessions are split at block boundaries with energy proportional to
the sub-window length.

Candidate evaluation across households is independent (planners are pure),
so it may run in parallel; this implementation keeps a single thread and a
deterministic id-ordered reduction, which parallel workers must reproduce.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .devices import (
    Buffer, BufferTimeShiftable, ChargingSession, Job, ThermalBuffer,
    TimeShiftable, plan_buffer_timeshiftable_values, plan_buffer_values,
    plan_thermal_values, plan_timeshiftable_values, pv_profile, storage_trajectory,
)
from .errors import PlanningError
from .ingest import WeatherSeries
from .profiles import EnergyPrice, TimeGrid
from .scenario import Household

CATEGORY_TIMESHIFTABLE = "timeshiftable"
CATEGORY_BUFFER_TS = "buffer_ts"
CATEGORY_BATTERY = "battery"
CATEGORY_THERMAL = "thermal"


@dataclass
class SteeringRunConfig:
    alpha: float
    block_len: int = 96
    epsilon_w: float = 1.0
    max_iters: int = 100
    split_deviation: bool = False  # spread the deviation 1/N instead of full absorption

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.block_len < 1 or self.max_iters < 1 or self.epsilon_w <= 0:
            raise ValueError("invalid steering configuration")


@dataclass
class TraceRecord:
    block: int
    iteration: int
    household: int
    improvement_w: float
    distance_w: float


@dataclass
class PreparedHousehold:
    """Full-horizon planning data for one household."""

    id: int
    fixed_w: np.ndarray  # base load plus PV, the unsteered part
    devices: list  # (key, category, device) with full-horizon constraint data


@dataclass
class SteeringResult:
    grid: TimeGrid
    house_profiles: dict
    device_profiles: dict  # (house_id, key) -> full-horizon values
    device_categories: dict  # (house_id, key) -> category
    traces: list[TraceRecord]
    block_init_distance_w: list[float] = field(default_factory=list)
    block_final_distance_w: list[float] = field(default_factory=list)


def prepare_household(house: Household, weather: WeatherSeries) -> PreparedHousehold:
    """Materialize weather-dependent profiles and collect plannable devices."""
    grid = weather.grid
    fixed = house.base_load.values.copy()
    if house.pv is not None:
        fixed += pv_profile(house.pv.area_m2, house.pv.efficiency,
                            weather.ghi_wm2, grid).values
    devices = []
    for i, ts in enumerate(house.timeshiftables):
        devices.append((f"ts:{ts.label}:{i}", CATEGORY_TIMESHIFTABLE, ts))
    for i, veh in enumerate(house.vehicles):
        devices.append((f"veh:{veh.label}:{i}", CATEGORY_BUFFER_TS, veh))
    if house.heatpump is not None:
        hp = house.heatpump
        demand = hp.demand_kwh(weather.temperature_c, grid.dt_h)
        thermal = ThermalBuffer(hp.store_kwh_th, hp.cop, hp.max_power_w, demand,
                                hp.store0_kwh)
        devices.append(("thermal:heatpump:0", CATEGORY_THERMAL, thermal))
    if house.battery is not None:
        devices.append(("battery:battery:0", CATEGORY_BATTERY, house.battery))
    return PreparedHousehold(house.id, fixed, devices)


# ---------------------------------------------------------------------------
# Block views
# ---------------------------------------------------------------------------

@dataclass
class _BlockDevice:
    key: str
    category: str
    device: object  # block-local device with carried state applied


@dataclass
class BlockView:
    house_id: int
    fixed: np.ndarray
    devices: list[_BlockDevice]


def split_session_energy(session: ChargingSession, blocks) -> list:
    """Split one charging session at block boundaries.

    Energy is allocated proportional to each sub-window's length, with the last
    share taking the rounding residue so the parts sum to the requirement
    exactly.  Proportional allocation preserves power feasibility.
    """
    total = session.departure - session.arrival
    parts = []
    for b, (b0, b1) in enumerate(blocks):
        lo = max(session.arrival, b0)
        hi = min(session.departure, b1)
        if lo < hi:
            parts.append([b, lo, hi, session.required_kwh * (hi - lo) / total])
    if parts:
        parts[-1][3] = session.required_kwh - sum(p[3] for p in parts[:-1])
    return parts


def _session_parts_by_block(prepared, blocks):
    """(house_id, key) -> block index -> list of block-local ChargingSession."""
    out = {}
    for ph in prepared:
        for key, category, dev in ph.devices:
            if category != CATEGORY_BUFFER_TS:
                continue
            per_block = {}
            for s in dev.sessions:
                for b, lo, hi, kwh in split_session_energy(s, blocks):
                    b0 = blocks[b][0]
                    per_block.setdefault(b, []).append(
                        ChargingSession(lo - b0, hi - b0, kwh))
            out[(ph.id, key)] = per_block
    return out


def _block_view(ph, b, b0, b1, session_parts, storage_state):
    devices = []
    for key, category, dev in ph.devices:
        if category == CATEGORY_TIMESHIFTABLE:
            jobs = []
            for i, job in enumerate(dev.jobs):
                if job.earliest_start >= b1 or job.earliest_start < b0:
                    continue
                deadline = min(job.deadline, b1 - 1)
                if job.earliest_start + job.length - 1 > deadline:
                    raise PlanningError(
                        f"house {ph.id} {dev.label} job {i} straddles planning blocks; "
                        f"align block_len with job windows")
                jobs.append(Job(job.shape_w, job.earliest_start - b0, deadline - b0))
            devices.append(_BlockDevice(key, category, TimeShiftable(dev.label, jobs)))
        elif category == CATEGORY_BUFFER_TS:
            sessions = session_parts[(ph.id, key)].get(b, [])
            devices.append(_BlockDevice(key, category, BufferTimeShiftable(
                dev.label, dev.capacity_kwh, dev.max_power_w, sessions)))
        elif category == CATEGORY_BATTERY:
            soc = storage_state[(ph.id, key)]
            devices.append(_BlockDevice(key, category, Buffer(
                dev.capacity_kwh, dev.max_power_w, soc, dev.efficiency)))
        else:
            store = storage_state[(ph.id, key)]
            devices.append(_BlockDevice(key, category, ThermalBuffer(
                dev.store_kwh_th, dev.cop, dev.max_power_w,
                dev.heat_demand_kwh[b0:b1], store)))
    return BlockView(ph.id, ph.fixed_w[b0:b1], devices)


_PLANNERS = {
    CATEGORY_TIMESHIFTABLE: plan_timeshiftable_values,
    CATEGORY_BUFFER_TS: plan_buffer_timeshiftable_values,
    CATEGORY_BATTERY: plan_buffer_values,
    CATEGORY_THERMAL: plan_thermal_values,
}


@dataclass
class HousePlan:
    profile: np.ndarray
    device_plans: list  # aligned with BlockView.devices


def plan_household(view: BlockView, desired_total: np.ndarray, prices: np.ndarray,
                   alpha: float, dt_h: float) -> HousePlan:
    """Plan all devices of one household against a desired total profile.

    Devices are planned sequentially, each against the residual between the
    desired household profile and everything already planned.
    """
    current = view.fixed.copy()
    plans = []
    for bd in view.devices:
        d_dev = desired_total - current
        x = _PLANNERS[bd.category](bd.device, d_dev, prices, alpha, dt_h)
        plans.append(x)
        current = current + x
    return HousePlan(current, plans)


# ---------------------------------------------------------------------------
# Phases
# ---------------------------------------------------------------------------

def initialize(views, prices: np.ndarray, alpha: float, dt_h: float) -> dict:
    """Initialization phase: each household flattens its own net load once."""
    plans = {}
    for view in views:
        flat = np.full(view.fixed.shape[0], view.fixed.mean())
        plans[view.house_id] = plan_household(view, flat, prices, alpha, dt_h)
    return plans


def iterate_block(views, plans, prices: np.ndarray, cfg: SteeringRunConfig,
                  block_index: int, dt_h: float) -> list[TraceRecord]:
    """Iteration phase: single-winner best-improvement loop; mutates `plans`."""
    if not views:
        return []
    n = views[0].fixed.shape[0]
    aggregate = np.zeros(n)
    for view in views:
        aggregate += plans[view.house_id].profile
    records = []
    share = 1.0 / len(views) if cfg.split_deviation else 1.0

    for iteration in range(1, cfg.max_iters + 1):
        deviation = aggregate - aggregate.mean()
        distance = float(np.sqrt(np.dot(deviation, deviation)))
        best = None
        best_delta = 0.0
        for view in views:
            current = plans[view.house_id].profile
            candidate = plan_household(view, current - deviation * share,
                                       prices, cfg.alpha, dt_h)
            residual = deviation - current + candidate.profile
            new_distance = float(np.sqrt(np.dot(residual, residual)))
            delta = distance - new_distance
            if delta > best_delta:
                best = (view.house_id, candidate)
                best_delta = delta
        if best is None or best_delta < cfg.epsilon_w:
            break
        house_id, candidate = best
        aggregate += candidate.profile - plans[house_id].profile
        plans[house_id] = candidate
        after = aggregate - aggregate.mean()
        records.append(TraceRecord(block_index, iteration, house_id, best_delta,
                                   float(np.sqrt(np.dot(after, after)))))
    return records


def run_steering(households, weather: WeatherSeries, prices: EnergyPrice,
                 cfg: SteeringRunConfig) -> SteeringResult:
    """Run both phases over every planning block of the horizon."""
    grid = weather.grid
    if prices.grid != grid:
        raise PlanningError("prices are not on the planning grid")
    n = grid.n_intervals
    dt_h = grid.dt_h
    blocks = [(b0, min(b0 + cfg.block_len, n)) for b0 in range(0, n, cfg.block_len)]

    prepared = [prepare_household(h, weather) for h in households]
    session_parts = _session_parts_by_block(prepared, blocks)
    storage_state = {}
    for ph in prepared:
        for key, category, dev in ph.devices:
            if category == CATEGORY_BATTERY:
                storage_state[(ph.id, key)] = dev.soc0_kwh
            elif category == CATEGORY_THERMAL:
                storage_state[(ph.id, key)] = dev.store0_kwh

    result = SteeringResult(
        grid=grid,
        house_profiles={ph.id: ph.fixed_w.copy() for ph in prepared},
        device_profiles={(ph.id, key): np.zeros(n)
                         for ph in prepared for key, _, _ in ph.devices},
        device_categories={(ph.id, key): category
                           for ph in prepared for key, category, _ in ph.devices},
        traces=[],
    )

    for b, (b0, b1) in enumerate(blocks):
        views = [_block_view(ph, b, b0, b1, session_parts, storage_state)
                 for ph in prepared]
        prices_block = prices.values[b0:b1]
        plans = initialize(views, prices_block, cfg.alpha, dt_h)

        agg = np.zeros(b1 - b0)
        for view in views:
            agg += plans[view.house_id].profile
        dev0 = agg - agg.mean()
        result.block_init_distance_w.append(float(np.sqrt(np.dot(dev0, dev0))))

        records = iterate_block(views, plans, prices_block, cfg, b, dt_h)
        result.traces.extend(records)
        result.block_final_distance_w.append(
            records[-1].distance_w if records else result.block_init_distance_w[-1])

        for view in views:
            plan = plans[view.house_id]
            for bd, x in zip(view.devices, plan.device_plans):
                result.device_profiles[(view.house_id, bd.key)][b0:b1] = x
                result.house_profiles[view.house_id][b0:b1] += x
                if bd.category == CATEGORY_BATTERY:
                    dev = bd.device
                    traj = storage_trajectory(x, dt_h, dev.efficiency, 1.0,
                                              dev.soc0_kwh * 1000.0, np.zeros(len(x)))
                    storage_state[(view.house_id, bd.key)] = min(
                        dev.capacity_kwh, max(0.0, traj[-1] / 1000.0))
                elif bd.category == CATEGORY_THERMAL:
                    dev = bd.device
                    traj = storage_trajectory(x, dt_h, dev.cop, dev.cop,
                                              dev.store0_kwh * 1000.0,
                                              dev.heat_demand_kwh * 1000.0)
                    storage_state[(view.house_id, bd.key)] = min(
                        dev.store_kwh_th, max(0.0, traj[-1] / 1000.0))
    return result


def trace_to_csv(records) -> str:
    lines = ["block,iter,household,improvement_w,distance_w"]
    for r in records:
        lines.append(f"{r.block},{r.iteration},{r.household},"
                     f"{r.improvement_w!r},{r.distance_w!r}")
    return "\n".join(lines) + "\n"


def blockwise_distance_to_flat(values: np.ndarray, block_len: int) -> float:
    """Euclidean distance to the per-block flat targets, composed over blocks."""
    total = 0.0
    for b0 in range(0, values.shape[0], block_len):
        block = values[b0:b0 + block_len]
        dev = block - block.mean()
        total += float(np.dot(dev, dev))
    return float(np.sqrt(total))