"""Device models and their local planners.

Every planner minimizes the same blended objective over its feasible set:

    J(x) = alpha * sum_t (x_t - d_t)^2
         + (1 - alpha) * beta * sum_t price_t * x_t * dt_h

where d is the desired (difference) profile from the steering signal,
alpha in [0, 1] weighs flatness against cost, dt_h is the interval length
in hours, and beta = (||d|| + eps) / (||price|| + eps) makes the two terms
dimensionally comparable.  alpha = 1 is pure profile steering, alpha = 0 is
pure price response.

Internally powers are W and buffer energies Wh; public device parameters
stay in kWh as configured.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PlanningError
from .profiles import EnergyPrice, Profile, TimeGrid, _require_same_grid

BETA_EPS = 1e-9
ENERGY_RTOL = 1e-9
BISECTION_MAX_ITERS = 200
SWEEP_MAX = 500
SWEEP_RTOL = 1e-6


# ---------------------------------------------------------------------------
# Steering signal and objective
# ---------------------------------------------------------------------------

@dataclass
class SteeringSignal:
    """What a device plans against: desired profile, prices and blend weight."""

    desired: Profile
    prices: EnergyPrice
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        _require_same_grid(self.desired.grid, self.prices.grid)

    def beta(self) -> float:
        return signal_beta(self.desired.values, self.prices.values)


def signal_beta(desired: np.ndarray, prices: np.ndarray) -> float:
    dn = float(np.sqrt(np.dot(desired, desired)))
    pn = float(np.sqrt(np.dot(prices, prices)))
    return (dn + BETA_EPS) / (pn + BETA_EPS)


def objective(x: np.ndarray, sig: SteeringSignal) -> float:
    """J(x) for a candidate device profile on the signal grid."""
    return _objective(x, sig.desired.values, sig.prices.values, sig.alpha,
                      sig.beta(), sig.desired.grid.dt_h)


def _objective(x, d, prices, alpha, beta, dt_h) -> float:
    diff = x - d
    quad = float(np.dot(diff, diff))
    cost = float(np.dot(prices, x)) * dt_h
    return alpha * quad + (1.0 - alpha) * beta * cost


# ---------------------------------------------------------------------------
# Device types
# ---------------------------------------------------------------------------

@dataclass
class Job:
    """Fixed consumption shape that may start anywhere in [earliest_start, deadline - len + 1]."""

    shape_w: np.ndarray
    earliest_start: int
    deadline: int  # last allowed finish index (inclusive)

    def __post_init__(self):
        self.shape_w = np.asarray(self.shape_w, dtype=np.float64)
        if self.shape_w.ndim != 1 or self.shape_w.size == 0:
            raise ValueError("job shape must be a non-empty vector")
        if np.any(self.shape_w < 0):
            raise ValueError("job shape must be non-negative")
        if self.earliest_start + self.shape_w.size - 1 > self.deadline:
            raise ValueError("job window shorter than its shape")

    @property
    def length(self) -> int:
        return self.shape_w.size

    def energy_kwh(self, dt_h: float) -> float:
        return float(self.shape_w.sum()) * dt_h / 1000.0


@dataclass
class TimeShiftable:
    label: str
    jobs: list[Job] = field(default_factory=list)


@dataclass
class ChargingSession:
    arrival: int
    departure: int  # exclusive
    required_kwh: float


@dataclass
class BufferTimeShiftable:
    """EV/PHEV style charging: energy target inside a session window, bounded power."""

    label: str
    capacity_kwh: float
    max_power_w: float
    sessions: list[ChargingSession] = field(default_factory=list)

    def validate_sessions(self, dt_h: float) -> None:
        for i, s in enumerate(self.sessions):
            if s.arrival >= s.departure:
                raise ValueError(f"{self.label} session {i}: arrival must precede departure")
            if s.required_kwh > self.capacity_kwh + 1e-12:
                raise ValueError(f"{self.label} session {i}: required energy exceeds capacity")
            if s.required_kwh * 1000.0 > self.max_power_w * (s.departure - s.arrival) * dt_h + 1e-9:
                raise ValueError(f"{self.label} session {i}: required energy not reachable "
                                 f"at max power")


@dataclass
class Buffer:
    """Battery: bidirectional storage with state-of-charge bounds, free terminal SoC."""

    capacity_kwh: float
    max_power_w: float
    soc0_kwh: float
    efficiency: float = 1.0


@dataclass
class ThermalBuffer:
    """Heat pump feeding a thermal store that must always cover the heat demand."""

    store_kwh_th: float
    cop: float
    max_power_w: float
    heat_demand_kwh: np.ndarray  # thermal drain per interval, on the signal grid
    store0_kwh: float

    def __post_init__(self):
        self.heat_demand_kwh = np.asarray(self.heat_demand_kwh, dtype=np.float64)


@dataclass
class PvPanel:
    area_m2: float
    efficiency: float


# ---------------------------------------------------------------------------
# Time-shiftable planning: exhaustive start enumeration per job
# ---------------------------------------------------------------------------

def plan_timeshiftable(dev: TimeShiftable, sig: SteeringSignal) -> Profile:
    x = plan_timeshiftable_values(dev, sig.desired.values, sig.prices.values,
                                  sig.alpha, sig.desired.grid.dt_h)
    return Profile(sig.desired.grid, x)


def plan_timeshiftable_values(dev, d, prices, alpha, dt_h, beta=None):
    if beta is None:
        beta = signal_beta(d, prices)
    n = d.shape[0]
    x = np.zeros(n)
    for i, job in enumerate(dev.jobs):
        start = _best_job_start(job, d, prices, alpha, beta, dt_h, n, dev.label, i)
        x[start:start + job.length] += job.shape_w
    return x


def _best_job_start(job, d, prices, alpha, beta, dt_h, n, label, idx):
    length = job.length
    first = job.earliest_start
    last = min(job.deadline - length + 1, n - length)
    if first < 0 or last < first:
        raise PlanningError(f"timeshiftable '{label}' job {idx}: no feasible start "
                            f"in window [{job.earliest_start}, {job.deadline}]")
    # J restricted to the candidate footprint; constant terms dropped
    shape = job.shape_w
    window_d = d[first:last + length]
    window_p = prices[first:last + length]
    ssq = float(np.dot(shape, shape))
    dot_d = np.correlate(window_d, shape, mode="valid")
    costs = alpha * (ssq - 2.0 * dot_d)
    if alpha < 1.0:
        dot_p = np.correlate(window_p, shape, mode="valid")
        costs = costs + (1.0 - alpha) * beta * dt_h * dot_p
    return first + int(np.argmin(costs))  # argmin takes the earliest on ties


# ---------------------------------------------------------------------------
# Buffer-time-shiftable planning: water-filling per session
# ---------------------------------------------------------------------------

def plan_buffer_timeshiftable(dev: BufferTimeShiftable, sig: SteeringSignal) -> Profile:
    x = plan_buffer_timeshiftable_values(dev, sig.desired.values, sig.prices.values,
                                         sig.alpha, sig.desired.grid.dt_h)
    return Profile(sig.desired.grid, x)


def plan_buffer_timeshiftable_values(dev, d, prices, alpha, dt_h, beta=None):
    if beta is None:
        beta = signal_beta(d, prices)
    n = d.shape[0]
    x = np.zeros(n)
    for i, s in enumerate(dev.sessions):
        if not 0 <= s.arrival < s.departure <= n:
            raise PlanningError(f"{dev.label} session {i}: window outside planning grid")
        window = slice(s.arrival, s.departure)
        x[window] = fill_window(d[window], prices[window], alpha, beta, dt_h,
                                s.required_kwh * 1000.0, dev.max_power_w,
                                context=f"{dev.label} session {i}")
    return x


def fill_window(d, prices, alpha, beta, dt_h, energy_wh, p_max, context="session"):
    """Charge `energy_wh` inside one window at power in [0, p_max], minimizing J.

    alpha > 0: water-filling x_t = clamp(base_t + mu, 0, p_max) with the level mu
    found by bisection on the energy constraint.  alpha = 0: greedy fill of the
    cheapest intervals at max power with a single fractional interval.
    """
    n = d.shape[0]
    if energy_wh <= 0.0:
        return np.zeros(n)
    target = energy_wh / dt_h  # total power-sum to place, W
    cap = p_max * n
    if target > cap * (1.0 + 1e-9):
        raise PlanningError(f"{context}: required energy exceeds window capacity")
    target = min(target, cap)

    if alpha == 0.0:
        order = np.lexsort((np.arange(n), prices))  # cheapest first, ties to earlier index
        x = np.zeros(n)
        remaining = target
        for idx in order:
            put = p_max if remaining >= p_max else remaining
            x[idx] = put
            remaining -= put
            if remaining <= 0.0:
                break
        return x

    base = d - (1.0 - alpha) * beta * prices * dt_h / (2.0 * alpha)
    return _waterfill_box(base, target, 0.0, p_max, context)


# ---------------------------------------------------------------------------
# Storage planning: cyclic coordinate descent with SoC projection
# ---------------------------------------------------------------------------

def plan_buffer(dev: Buffer, sig: SteeringSignal) -> Profile:
    x = plan_buffer_values(dev, sig.desired.values, sig.prices.values,
                           sig.alpha, sig.desired.grid.dt_h)
    return Profile(sig.desired.grid, x)


def plan_buffer_values(dev, d, prices, alpha, dt_h, beta=None):
    cap_wh = dev.capacity_kwh * 1000.0
    soc0_wh = dev.soc0_kwh * 1000.0
    if not 0.0 <= soc0_wh <= cap_wh:
        raise PlanningError(f"invalid initial SoC {dev.soc0_kwh} kWh for capacity "
                            f"{dev.capacity_kwh} kWh")
    n = d.shape[0]
    return _descend_storage(
        d, prices, alpha, dt_h,
        p_min=-dev.max_power_w, p_max=dev.max_power_w,
        gain_pos=dev.efficiency, gain_neg=1.0,
        store0=soc0_wh, store_cap=cap_wh,
        drains=np.zeros(n), start=np.zeros(n), beta=beta)


def plan_thermal(dev: ThermalBuffer, sig: SteeringSignal) -> Profile:
    x = plan_thermal_values(dev, sig.desired.values, sig.prices.values,
                            sig.alpha, sig.desired.grid.dt_h)
    return Profile(sig.desired.grid, x)


def plan_thermal_values(dev, d, prices, alpha, dt_h, beta=None):
    n = d.shape[0]
    drains = dev.heat_demand_kwh * 1000.0
    if drains.shape[0] != n:
        raise PlanningError("thermal demand length does not match planning grid")
    cap_wh = dev.store_kwh_th * 1000.0
    store0 = dev.store0_kwh * 1000.0
    if not 0.0 <= store0 <= cap_wh:
        raise PlanningError(f"invalid initial store {dev.store0_kwh} kWh for capacity "
                            f"{dev.store_kwh_th} kWh")
    start = _thermal_feasible_start(dev, drains, store0, cap_wh, dt_h)
    return _descend_storage(
        d, prices, alpha, dt_h,
        p_min=0.0, p_max=dev.max_power_w,
        gain_pos=dev.cop, gain_neg=dev.cop,
        store0=store0, store_cap=cap_wh,
        drains=drains, start=start, beta=beta)


def _thermal_feasible_start(dev, drains, store0, cap_wh, dt_h):
    """Feasibility check plus a deterministic feasible starting plan.

    Uses just-in-time charging when per-interval demand allows it, otherwise
    the maximal-charging plan (which is feasible iff any plan is).
    """
    n = drains.shape[0]
    inflow_max = dev.cop * dev.max_power_w * dt_h
    # maximal reachable store level per interval; < 0 means demand is unservable
    level = store0
    max_level = np.empty(n)
    for t in range(n):
        level = min(cap_wh, level + inflow_max - drains[t])
        max_level[t] = level
        if level < -1e-6:
            raise PlanningError(f"thermal demand unservable at interval {t}")

    x = np.zeros(n)
    store = store0
    jit_ok = True
    for t in range(n):
        need = drains[t] - store
        xt = 0.0 if need <= 0.0 else need / (dev.cop * dt_h)
        if xt > dev.max_power_w + 1e-9:
            jit_ok = False
            break
        xt = min(xt, dev.max_power_w)
        store = store + dev.cop * xt * dt_h - drains[t]
        x[t] = xt
    if jit_ok:
        return x
    # bank ahead: charge as much as the store allows
    x = np.zeros(n)
    store = store0
    for t in range(n):
        xt = min(dev.max_power_w, max(0.0, (cap_wh - store + drains[t]) / (dev.cop * dt_h)))
        store = min(cap_wh, max(0.0, store + dev.cop * xt * dt_h - drains[t]))
        x[t] = xt
    return x


def _descend_storage(d, prices, alpha, dt_h, p_min, p_max, gain_pos, gain_neg,
                     store0, store_cap, drains, start, beta=None):
    """Cyclic coordinate descent on the storage planning problem.

    Store recursion: store_t = store_{t-1} + gain(x_t) * dt_h - drains_t with
    gain(x) = gain_pos * x for x >= 0 and gain_neg * x for x < 0, and
    0 <= store_t <= store_cap at every interval.  Each coordinate is set to its
    closed-form minimizer, projected onto the power box and the store-feasible
    interval; sweeps repeat until the relative objective improvement drops
    below SWEEP_RTOL.  The returned plan is always store-feasible.
    """
    if beta is None:
        beta = signal_beta(d, prices)
    n = d.shape[0]
    price_coeff = (1.0 - alpha) * beta * prices * dt_h

    if alpha > 0.0:
        targets = d - price_coeff / (2.0 * alpha)
        # fast path: the box-clamped unconstrained optimum, exact when the
        # store constraints turn out inactive along its trajectory
        x_free = np.clip(targets, p_min, p_max)
        store = store0 + np.cumsum(_gain(x_free, gain_pos, gain_neg) * dt_h - drains)
        if store.min() >= -1e-9 and store.max() <= store_cap + 1e-9:
            return x_free
        if gain_pos == gain_neg:
            # store constraints bind: single-coordinate moves alone stall, so
            # start from the exact max-violation splitting solution
            scale = gain_pos * dt_h
            lo_band = (np.cumsum(drains) - store0) / scale
            xs = _split_storage(targets, p_min, p_max, lo_band, lo_band + store_cap / scale)
            traj = store0 + np.cumsum(xs * scale) - np.cumsum(drains)
            if traj.min() >= -1e-6 and traj.max() <= store_cap + 1e-6:
                start = xs
    else:
        # linear objective; work from the raw prices so the plan is bit-identical
        # for any desired profile (beta only rescales the objective)
        targets = np.where(prices > 0.0, p_min, np.where(prices < 0.0, p_max, np.nan))
        if gain_pos == gain_neg:
            # coordinate descent stalls on linear objectives (buy/sell pairs need
            # two simultaneous moves); start from the exact linear-case optimum
            scale = gain_pos * dt_h
            u = _storage_lp(prices / scale, p_min * scale, p_max * scale,
                            store_cap, store0, drains)
            start = u / scale

    x = [float(v) for v in start]
    tgt = [float(v) for v in targets]
    gains = [_gain_scalar(v, gain_pos, gain_neg) * dt_h for v in x]
    cum_drains = np.cumsum(drains)
    best_j = _objective(np.asarray(x), d, prices, alpha, beta, dt_h)

    for _ in range(SWEEP_MAX):
        store = store0 + np.cumsum(gains) - cum_drains
        suff_min = np.minimum.accumulate(store[::-1])[::-1].tolist()
        suff_max = np.maximum.accumulate(store[::-1])[::-1].tolist()
        cumshift = 0.0
        for t in range(n):
            target = tgt[t]
            if target != target:  # zero price coefficient at alpha=0: leave as is
                continue
            g_old = gains[t]
            g_lo = g_old - (suff_min[t] + cumshift)
            g_hi = g_old + (store_cap - suff_max[t] - cumshift)
            if g_lo > g_hi:  # numerical corner: no slack, keep current value
                continue
            lo = _gain_inv(g_lo / dt_h, gain_pos, gain_neg)
            hi = _gain_inv(g_hi / dt_h, gain_pos, gain_neg)
            if lo < p_min:
                lo = p_min
            if hi > p_max:
                hi = p_max
            if lo > hi:
                continue
            new = target if lo <= target <= hi else (lo if target < lo else hi)
            if new != x[t]:
                g_new = _gain_scalar(new, gain_pos, gain_neg) * dt_h
                cumshift += g_new - g_old
                gains[t] = g_new
                x[t] = new
        j = _objective(np.asarray(x), d, prices, alpha, beta, dt_h)
        if best_j - j < SWEEP_RTOL * (abs(best_j) + 1e-12):
            best_j = min(best_j, j)
            break
        best_j = j
    return np.asarray(x)


def _waterfill_box(targets, total, p_min, p_max, context):
    """clip(targets + mu, p_min, p_max) with mu bisected so the sum equals `total`.

    The residual left by the bisection tolerance is spread over the interior
    (unclipped) coordinates so the sum constraint holds to float precision.
    """
    base = targets.tolist()
    lo = p_min - max(base)
    hi = p_max - min(base)
    tol = ENERGY_RTOL * max(abs(total), 1.0)
    mu = lo
    for _ in range(BISECTION_MAX_ITERS):
        mu = 0.5 * (lo + hi)
        s = 0.0
        for b in base:
            v = b + mu
            s += p_min if v < p_min else (p_max if v > p_max else v)
        if s != s:
            raise PlanningError(f"{context}: water-filling bisection did not converge "
                                f"(non-finite input?)")
        if abs(s - total) <= tol:
            break
        if s < total:
            lo = mu
        else:
            hi = mu
        if hi - lo <= 1e-15 * max(1.0, abs(hi) + abs(lo)):
            break
    else:
        raise PlanningError(f"{context}: water-filling bisection did not converge")
    x = np.clip(targets + mu, p_min, p_max)
    span = p_max - p_min
    interior = (x > p_min + 1e-12 * span) & (x < p_max - 1e-12 * span)
    k = int(interior.sum())
    if k:
        x[interior] += (total - x.sum()) / k
        np.clip(x, p_min, p_max, out=x)
    return x


def _waterfill_mu_exact(base, total, p_min, p_max):
    """Exact fill level for sum(clip(base + mu, p_min, p_max)) == total.

    Breakpoint sweep over the piecewise-linear, nondecreasing sum; used by the
    storage split solver where the fill level is internal machinery.
    """
    n = len(base)
    events = []
    for b in base:
        events.append((p_min - b, 1))
        events.append((p_max - b, -1))
    events.sort()
    if total <= n * p_min:
        return events[0][0]
    cur_mu = events[0][0]
    cur_sum = n * p_min
    active = 0
    for mu_e, delta in events:
        if active > 0 and mu_e > cur_mu:
            segment = active * (mu_e - cur_mu)
            if cur_sum + segment >= total:
                return cur_mu + (total - cur_sum) / active
            cur_sum += segment
        cur_mu = mu_e
        active += delta
    return cur_mu  # total at (or numerically above) n * p_max


def _split_storage(targets, p_min, p_max, lo_band, hi_band):
    """Exact storage plan for strictly convex per-interval costs.

    `targets` are the per-coordinate unconstrained minimizers; the cumulative
    power sums U_t = sum_{u<=t} x_u must stay inside [lo_band, hi_band] (the
    store bounds translated to cumulative form).  The box-relaxed optimum is
    clipped targets; where its trajectory leaves the band, the optimum touches
    the band at the deepest violation, so the problem splits there into an
    energy-pinned prefix (water-filling) and an independent suffix.
    """
    n = targets.shape[0]
    out = np.empty(n)
    max_depth = 2 * n + 8

    def solve(a, b, offset, total, depth=0):
        if depth > max_depth:
            raise PlanningError("storage split recursion did not converge")
        seg = targets[a:b]
        if total is None:
            x = np.clip(seg, p_min, p_max)
        else:
            mu = _waterfill_mu_exact(seg.tolist(), total, p_min, p_max)
            x = np.clip(seg + mu, p_min, p_max)
        u = offset + np.cumsum(x)
        # the terminal of an energy-pinned segment sits on its pin by construction
        check = slice(None) if total is None else slice(None, -1)
        over = u[check] - hi_band[a:b][check]
        under = lo_band[a:b][check] - u[check]
        if over.size == 0 or max(float(over.max()), float(under.max())) <= 1e-7:
            out[a:b] = x
            return
        o_max = float(over.max())
        u_max = float(under.max())
        if o_max >= u_max:
            t = a + int(np.argmax(over))
            pin = float(hi_band[t])
        else:
            t = a + int(np.argmax(under))
            pin = float(lo_band[t])
        m = t + 1 - a
        left = min(max(pin - offset, m * p_min), m * p_max)
        solve(a, t + 1, offset, left, depth + 1)
        if t + 1 < b:
            solve(t + 1, b, offset + left, None if total is None else total - left,
                  depth + 1)

    solve(0, n, 0.0, None)
    return out


def _storage_lp(costs, u_lo, u_hi, cap, s0, drains):
    """Exact solution of the pure price case of storage planning.

    Minimizes sum_t costs[t] * u[t] over store inflows u[t] in [u_lo, u_hi] (Wh)
    subject to the store recursion s_t = s_{t-1} + u_t - drains[t] staying in
    [0, cap], terminal level free.  Dynamic programming over convex
    piecewise-linear value functions; cyclic coordinate descent alone stalls on
    this linear objective because profitable buy/sell pairs need two
    coordinates to move at once.

    Consecutive intervals with identical cost and drain (hourly data on a
    15-minute grid) are merged and their inflow split uniformly afterwards;
    group averaging preserves both cost and feasibility, so this is exact.
    """
    full_n = len(costs)
    groups = []  # (first_index, count, cost, drain_each)
    i = 0
    while i < full_n:
        j = i + 1
        while j < full_n and costs[j] == costs[i] and drains[j] == drains[i]:
            j += 1
        groups.append((i, j - i, float(costs[i]), float(drains[i])))
        i = j
    if len(groups) < full_n:
        g_costs = np.array([g[2] for g in groups])
        g_drains = np.array([g[1] * g[3] for g in groups])
        g_counts = np.array([g[1] for g in groups], dtype=float)
        g_u = _storage_lp_core(g_costs, u_lo * g_counts, u_hi * g_counts,
                               cap, s0, g_drains)
        u = np.empty(full_n)
        for (first, count, _, _), gu in zip(groups, g_u):
            u[first:first + count] = gu / count
        return u
    return _storage_lp_core(np.asarray(costs, float), np.full(full_n, u_lo),
                            np.full(full_n, u_hi), cap, s0, np.asarray(drains, float))


def _storage_lp_core(costs, u_los, u_his, cap, s0, drains):
    n = len(costs)
    # feasible entry domains, backward
    dom = [(0.0, cap)] * (n + 1)
    for t in range(n - 1, -1, -1):
        nlo, nhi = dom[t + 1]
        lo = max(0.0, nlo + drains[t] - u_his[t])
        hi = min(cap, nhi + drains[t] - u_los[t])
        if lo > hi + 1e-6:
            raise PlanningError(f"storage demand unservable at interval {t}")
        dom[t] = (lo, max(lo, hi))

    if not dom[0][0] - 1e-6 <= s0 <= dom[0][1] + 1e-6:
        raise PlanningError("initial store level cannot serve the demand")

    # backward sweep over value functions V_t(s) on dom[t]
    xs = np.array([0.0, cap])
    vs = np.array([0.0, 0.0])
    stages = []
    for t in range(n - 1, -1, -1):
        k = costs[t]
        w = drains[t]
        u_lo = u_los[t]
        u_hi = u_his[t]
        gx, gv = xs, vs + k * xs
        vmin = float(gv.min())
        flat = gx[gv <= vmin + 1e-12 * (abs(vmin) + 1.0)]
        zlo, zhi = float(flat[0]), float(flat[-1])  # argmin region (convex)
        lo, hi = dom[t]
        cand = np.concatenate((gx - u_hi + w, gx - u_lo + w,
                               [zlo - u_hi + w, zlo - u_lo + w, lo, hi]))
        cand = np.unique(np.clip(cand, lo, hi))
        a = np.maximum(gx[0], cand + u_lo - w)
        b = np.minimum(gx[-1], cand + u_hi - w)
        b = np.maximum(b, a)  # float guard inside the feasible domain
        z = np.clip(zlo, a, b)
        vals = k * (w - cand) + np.interp(z, gx, gv)
        stages.append((w, float(gx[0]), float(gx[-1]), zlo, zhi))
        xs, vs = _pwl_prune(cand, vals)

    # forward reconstruction; ties in the objective break toward least action
    u = np.zeros(n)
    s = s0
    for t in range(n):
        w, glo, ghi, zlo, zhi = stages[n - 1 - t]
        a = max(glo, s + u_los[t] - w)
        b = min(ghi, s + u_his[t] - w)
        if a > b:
            a = b = min(max(s + u_los[t] - w, glo), ghi)
        lo_int = max(zlo, a)
        hi_int = min(zhi, b)
        if lo_int <= hi_int:
            z = min(max(s - w, lo_int), hi_int)  # u = 0 when staying put is optimal
        else:
            z = a if zhi < a else b
        u[t] = z - s + w
        s = z
    return u


def _pwl_prune(xs, vs):
    """Drop collinear interior breakpoints of a piecewise-linear function."""
    if xs.shape[0] <= 2:
        return xs, vs
    keep = [0]
    for i in range(1, xs.shape[0] - 1):
        x0, x1, x2 = xs[keep[-1]], xs[i], xs[i + 1]
        v0, v1, v2 = vs[keep[-1]], vs[i], vs[i + 1]
        if abs((v1 - v0) * (x2 - x1) - (v2 - v1) * (x1 - x0)) > 1e-9 * (abs(v1) + 1.0):
            keep.append(i)
    keep.append(xs.shape[0] - 1)
    return xs[keep], vs[keep]


def _gain(x, gain_pos, gain_neg):
    return np.where(x >= 0.0, gain_pos * x, gain_neg * x)


def _gain_scalar(x, gain_pos, gain_neg):
    return gain_pos * x if x >= 0.0 else gain_neg * x


def _gain_inv(y, gain_pos, gain_neg):
    return y / gain_pos if y >= 0.0 else y / gain_neg


def storage_trajectory(x, dt_h, gain_pos, gain_neg, store0, drains) -> np.ndarray:
    """Store level after each interval for a given plan."""
    return store0 + np.cumsum(_gain(np.asarray(x, dtype=float), gain_pos, gain_neg) * dt_h
                              - np.asarray(drains, dtype=float))


# ---------------------------------------------------------------------------
# Uncontrolled (baseline) behaviors
# ---------------------------------------------------------------------------

def timeshiftable_baseline_values(dev: TimeShiftable, n: int) -> np.ndarray:
    """Every job starts as soon as its window opens."""
    x = np.zeros(n)
    for i, job in enumerate(dev.jobs):
        if job.earliest_start < 0 or job.earliest_start + job.length > n:
            raise PlanningError(f"timeshiftable '{dev.label}' job {i} outside horizon")
        x[job.earliest_start:job.earliest_start + job.length] += job.shape_w
    return x


def vehicle_baseline_values(dev: BufferTimeShiftable, n: int, dt_h: float) -> np.ndarray:
    """Charge at full power from arrival until the required energy is met."""
    x = np.zeros(n)
    p = dev.max_power_w
    for i, s in enumerate(dev.sessions):
        if not 0 <= s.arrival < s.departure <= n:
            raise PlanningError(f"{dev.label} session {i}: window outside horizon")
        energy_wh = s.required_kwh * 1000.0
        full = int(energy_wh // (p * dt_h))
        rem_w = (energy_wh - full * p * dt_h) / dt_h
        end = s.arrival + full
        if end > s.departure or (rem_w > 1e-9 and end >= s.departure):
            raise PlanningError(f"{dev.label} session {i}: required energy not "
                                f"reachable at max power")
        x[s.arrival:end] = p
        if rem_w > 1e-9:
            x[end] = rem_w
    return x


def thermal_baseline_values(dev: ThermalBuffer, dt_h: float) -> np.ndarray:
    """Uncontrolled heat pump: charge only when the store would under-run."""
    drains = dev.heat_demand_kwh * 1000.0
    cap_wh = dev.store_kwh_th * 1000.0
    store0 = dev.store0_kwh * 1000.0
    if not 0.0 <= store0 <= cap_wh:
        raise PlanningError(f"invalid initial store {dev.store0_kwh} kWh")
    return _thermal_feasible_start(dev, drains, store0, cap_wh, dt_h)


# ---------------------------------------------------------------------------
# PV
# ---------------------------------------------------------------------------

def pv_profile(area_m2: float, efficiency: float, ghi: np.ndarray, grid: TimeGrid) -> Profile:
    """Generation profile of a panel: -area * efficiency * GHI (W), never steered."""
    if area_m2 <= 0:
        raise ValueError("panel area must be positive")
    if not 0.15 <= efficiency <= 0.20:
        raise ValueError("panel efficiency must be in [0.15, 0.20]")
    ghi = np.asarray(ghi, dtype=np.float64)
    return Profile(grid, -area_m2 * efficiency * ghi)
