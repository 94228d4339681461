"""Radial low-voltage feeder: substation power flow and resistive losses.

Constant-voltage approximation: segment current is |downstream power| / V_nom,
so losses are R * (P/V)^2 per segment and the model stays exactly quadratic in
scale.  No voltage drop recursion, single-phase equivalent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FeederSimError
from .profiles import Profile, _require_same_grid


@dataclass
class FeederModel:
    """Chain of cable segments; segment i carries every house attached at >= i."""

    resistances_ohm: list[float]
    attachment: dict  # house id -> segment index
    v_nominal_v: float = 230.0

    def __post_init__(self):
        if not self.resistances_ohm or any(r <= 0 for r in self.resistances_ohm):
            raise ValueError("segment resistances must be positive")
        if self.v_nominal_v <= 0:
            raise ValueError("nominal voltage must be positive")
        n = len(self.resistances_ohm)
        for house, seg in self.attachment.items():
            if not 0 <= seg < n:
                raise ValueError(f"house {house} attached to invalid segment {seg}")


@dataclass
class FlowResult:
    substation: Profile
    losses: Profile
    segment_current_a: np.ndarray = field(repr=False)  # segments x intervals


def default_feeder(n_houses: int, segment_resistance_ohm: float = 0.05,
                   v_nominal_v: float = 230.0) -> FeederModel:
    """One segment per house, house i at the end of segment i."""
    if n_houses < 1:
        raise ValueError("need at least one house")
    return FeederModel([segment_resistance_ohm] * n_houses,
                       {i: i for i in range(n_houses)}, v_nominal_v)


def evaluate_feeder(feeder: FeederModel, house_profiles: dict) -> FlowResult:
    """Per-interval losses and substation flow for the given house profiles."""
    if not house_profiles:
        raise FeederSimError("no house profiles to evaluate")
    grids = [p.grid for p in house_profiles.values()]
    _require_same_grid(*grids)
    grid = grids[0]
    n_seg = len(feeder.resistances_ohm)

    per_segment = np.zeros((n_seg, grid.n_intervals))
    for house, profile in house_profiles.items():
        if house not in feeder.attachment:
            raise FeederSimError(f"house {house} is not attached to the feeder")
        per_segment[feeder.attachment[house]] += profile.values

    # segment i carries all houses attached at >= i (radial chain)
    downstream = np.cumsum(per_segment[::-1], axis=0)[::-1]
    current = np.abs(downstream) / feeder.v_nominal_v
    loss_per_segment = np.asarray(feeder.resistances_ohm)[:, None] * current ** 2
    losses = loss_per_segment.sum(axis=0)
    house_sum = per_segment.sum(axis=0)
    return FlowResult(
        substation=Profile(grid, house_sum + losses),
        losses=Profile(grid, losses),
        segment_current_a=current,
    )
