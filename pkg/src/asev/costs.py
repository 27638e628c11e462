"""Stage energy cost, battery degradation, terminal cost and the day objective.

Renewable energy is allocated at fleet level: the total charging draw in a
stage is covered by renewables first, the remainder is bought from the grid.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dynamics import CHARGE, WORK, ControlDecision, FleetParams, FleetState, charging_draw_kwh


class ProfileError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PriceAndRenewableProfiles:
    grid_price: np.ndarray  # length N + 1; the last entry prices the terminal shortfall
    renewable_price: float
    renewable_energy: np.ndarray  # kWh available per stage, length N

    def __post_init__(self):
        gp = np.asarray(self.grid_price, dtype=float)
        er = np.asarray(self.renewable_energy, dtype=float)
        object.__setattr__(self, "grid_price", gp)
        object.__setattr__(self, "renewable_energy", er)
        if gp.ndim != 1 or er.ndim != 1 or len(gp) != len(er) + 1:
            raise ProfileError(f"grid price needs horizon+1 entries, got {len(gp)} for horizon {len(er)}")
        if (gp < 0).any() or (er < 0).any() or self.renewable_price < 0:
            raise ProfileError("prices and renewable energy must be non-negative")

    @property
    def horizon(self) -> int:
        return len(self.renewable_energy)

    @property
    def terminal_price(self) -> float:
        return float(self.grid_price[-1])


@dataclass(frozen=True)
class DegradationParams:
    a0: float = 200.0
    a1: float = 400.0

    def __post_init__(self):
        if self.a0 < 0 or self.a1 < 0:
            raise ValueError("degradation coefficients must be non-negative")


@dataclass(frozen=True)
class CostBreakdown:
    energy: float = 0.0
    degradation: float = 0.0
    terminal: float = 0.0

    @property
    def total(self) -> float:
        return self.energy + self.degradation + self.terminal

    def as_dict(self) -> dict:
        return {"energy": self.energy, "degradation": self.degradation,
                "terminal": self.terminal, "total": self.total}


def energy_cost_for_draw(draw_kwh: float, e_rt: float, c_gt: float, c_r: float) -> float:
    renewable = min(draw_kwh, e_rt)
    return c_r * renewable + c_gt * (draw_kwh - renewable)


def stage_energy_cost(n_charging: int, e_rt: float, c_gt: float, c_r: float, e_c: float) -> float:
    """Cost of ``n_charging`` vehicles each drawing ``e_c`` kWh, renewables first."""
    return energy_cost_for_draw(n_charging * e_c, e_rt, c_gt, c_r)


def degradation_cost(soc: float, e_w: float, f_r: float, params: DegradationParams) -> float:
    """Linear wear cost of discharging ``e_w`` kWh at state of charge ``soc``.

    Grows as the battery gets emptier and shrinks with more cycles to failure.
    """
    if f_r <= 0:
        raise ValueError("invalid cycles to failure")
    return e_w * (params.a0 + params.a1 * (1.0 - soc)) / f_r


def stage_cost_components(fleet: FleetState, controls: Sequence[ControlDecision],
                          profiles: PriceAndRenewableProfiles, params: FleetParams,
                          degradation: DegradationParams = DegradationParams()) -> tuple[float, float, float]:
    """(energy cost, degradation cost, billed draw kWh) for one stage."""
    t = fleet.stage
    draw = 0.0
    wear = 0.0
    for a, c in zip(fleet.asevs, controls):
        if c.u == CHARGE:
            draw += charging_draw_kwh(a.soc, params)
        elif c.u == WORK:
            wear += degradation_cost(a.soc, params.e_work_kwh_per_stage, a.cycles_to_failure, degradation)
    energy = energy_cost_for_draw(draw, float(profiles.renewable_energy[t]),
                                  float(profiles.grid_price[t]), profiles.renewable_price)
    return energy, wear, draw


def stage_cost(fleet, controls, profiles, params, degradation=DegradationParams()) -> float:
    energy, wear, _ = stage_cost_components(fleet, controls, profiles, params, degradation)
    return energy + wear


def terminal_cost(fleet: FleetState, profiles: PriceAndRenewableProfiles, params: FleetParams) -> float:
    if fleet.stage != params.horizon:
        raise ValueError(f"terminal cost needs stage {params.horizon}, fleet is at {fleet.stage}")
    price = profiles.terminal_price
    return sum(price * params.capacity_kwh * max(params.soc_max - a.soc, 0.0) for a in fleet.asevs)


def accumulate(stage_costs: Iterable[tuple[float, float]], terminal: float) -> CostBreakdown:
    """Sum per-stage (energy, degradation) pairs and add the terminal cost."""
    energy = 0.0
    wear = 0.0
    for e, d in stage_costs:
        energy += e
        wear += d
    return CostBreakdown(energy, wear, terminal)


# -- profile files ----------------------------------------------------------

def load_profile(path, expected_len: int) -> np.ndarray:
    """Read a ``stage,value`` CSV; stages must run 0..expected_len-1 in order."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and rows[0] and rows[0][0].strip().lower() == "stage":
        rows = rows[1:]
    rows = [r for r in rows if r and any(x.strip() for x in r)]
    if len(rows) != expected_len:
        raise ProfileError(f"{path}: profile length {len(rows)} ≠ horizon {expected_len}")
    values = np.empty(expected_len)
    for n, row in enumerate(rows):
        try:
            stage, value = int(row[0]), float(row[1])
        except (ValueError, IndexError):
            raise ProfileError(f"{path}: row {n + 2}: expected 'stage,value'") from None
        if stage != n:
            raise ProfileError(f"{path}: row {n + 2}: stage {stage} out of order, expected {n}")
        values[n] = value
    return values


def write_profile(path, values: Sequence[float], fmt: str = "{:.6f}") -> None:
    with open(path, "w", newline="") as fh:
        fh.write("stage,value\n")
        for n, v in enumerate(values):
            fh.write(f"{n},{fmt.format(v)}\n")


def _tier_minute(text: str) -> int:
    hh, mm = str(text).strip().split(":")
    return 60 * int(hh) + int(mm)


def expand_tiers(tiers: Sequence[tuple[str, str, float]], length: int, stage_minutes: float = 5.0,
                 wrap: bool = True) -> np.ndarray:
    """Expand ``(start_hhmm, end_hhmm, value)`` tiers into a per-stage vector.

    Intervals are half-open. With ``wrap`` a stage past 24:00 takes the value at
    its time of day, so entry 288 of a 289-long vector is the 00:00 value.
    """
    out = np.full(length, np.nan)
    for start, end, value in tiers:
        s, e = _tier_minute(start), _tier_minute(end)
        if not 0 <= s < e <= 24 * 60:
            raise ProfileError(f"bad tier {start}-{end}")
        for n in range(length):
            minute = n * stage_minutes
            if wrap:
                minute %= 24 * 60
            if s <= minute < e:
                out[n] = value
    if np.isnan(out).any():
        first = int(np.flatnonzero(np.isnan(out))[0])
        raise ProfileError(f"tiers leave stage {first} uncovered")
    return out


DEFAULT_TARIFF = (("00:00", "07:00", 0.07), ("07:00", "24:00", 0.15))
