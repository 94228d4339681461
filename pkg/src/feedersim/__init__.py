"""feedersim: price-based vs profile-steering demand-side management at desk scale."""

from .devices import (
    Buffer, BufferTimeShiftable, ChargingSession, Job, PvPanel, SteeringSignal,
    ThermalBuffer, TimeShiftable, objective, plan_buffer, plan_buffer_timeshiftable,
    plan_thermal, plan_timeshiftable, pv_profile,
)
from .errors import DataError, FeederSimError, IncompatibleGridError, PlanningError
from .feeder import FeederModel, FlowResult, default_feeder, evaluate_feeder
from .ingest import (
    ScenarioConfig, WeatherSeries, load_prices, load_scenario_config, load_weather,
)
from .profiles import (
    EnergyPrice, Profile, TimeGrid, aggregate, euclidean_distance, flat_target,
)
from .report import RunReport, run_baseline, run_comparison, run_steered
from .scenario import Household, TruncGauss, generate_scenario, sample_trunc_gauss
from .steering import SteeringRunConfig, TraceRecord, run_steering

__version__ = "0.1.0"
