"""Scenario documents (YAML) referencing CSV side files.

A scenario directory holds ``scenario.yaml`` plus its schedule and profile
CSVs. Paths inside the document are relative to the document itself.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from .costs import DEFAULT_TARIFF, DegradationParams, PriceAndRenewableProfiles, ProfileError, expand_tiers, load_profile
from .dynamics import DynamicsError, FleetParams
from .policies import RolloutConfig
from .sim import Scenario, ScenarioError, ScheduleEvent
from .workload import TruncatedNormalSpec, WorkloadError, load_schedule, parse_hhmm

DATA_DIR = Path(__file__).parent / "data" / "scenarios"
BUNDLED = ("bristol_summer", "bristol_winter", "bristol_cancel")


@dataclass(frozen=True)
class Diagnostic:
    key: str
    message: str
    remedy: str = ""

    def __str__(self):
        tail = f" (fix: {self.remedy})" if self.remedy else ""
        return f"{self.key}: {self.message}{tail}"


class ScenarioFileError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("\n".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


def bundled_scenario(name: str) -> Path:
    path = DATA_DIR / name / "scenario.yaml"
    if not path.exists():
        raise FileNotFoundError(f"no bundled scenario {name!r}; available: {', '.join(BUNDLED)}")
    return path


def _resolve(path: Path) -> Path:
    if path.is_dir():
        path = path / "scenario.yaml"
    return path


class _Loader:
    def __init__(self, path: Path):
        self.path = path
        self.base = path.parent
        self.diags: list[Diagnostic] = []

    def err(self, key, message, remedy=""):
        self.diags.append(Diagnostic(key, message, remedy))

    def section(self, doc, key) -> dict:
        val = doc.get(key) or {}
        if not isinstance(val, dict):
            self.err(key, "must be a mapping")
            return {}
        return val

    def fleet(self, doc) -> FleetParams | None:
        raw = self.section(doc, "fleet")
        names = {f.name for f in dataclasses.fields(FleetParams)}
        unknown = set(raw) - names
        for k in sorted(unknown):
            self.err(f"fleet.{k}", "unknown key", f"use one of {', '.join(sorted(names))}")
        try:
            return FleetParams(**{k: v for k, v in raw.items() if k in names})
        except (DynamicsError, TypeError) as exc:
            self.err("fleet", str(exc))
            return None

    def series(self, spec, key, length, dt, scale=1.0) -> np.ndarray | None:
        if not isinstance(spec, dict) or not ({"file", "tiers"} & set(spec)):
            self.err(key, "needs either 'file' or 'tiers'")
            return None
        try:
            if "file" in spec:
                p = self.base / spec["file"]
                if not p.exists():
                    self.err(f"{key}.file", f"file not found: {p}", "check the path relative to the scenario file")
                    return None
                values = load_profile(p, length)
            else:
                tiers = [tuple(t) for t in spec["tiers"]]
                values = expand_tiers(tiers, length, dt)
        except (ProfileError, ValueError, TypeError) as exc:
            self.err(key, str(exc))
            return None
        return values * scale

    def load(self) -> Scenario | None:
        try:
            doc = yaml.safe_load(self.path.read_text()) or {}
        except FileNotFoundError:
            self.err("<file>", f"scenario file not found: {self.path}")
            return None
        except yaml.YAMLError as exc:
            self.err("<file>", f"YAML parse error: {exc}")
            return None
        if not isinstance(doc, dict):
            self.err("<file>", "top level must be a mapping")
            return None

        fleet = self.fleet(doc)
        if fleet is None:
            return None
        n, dt = fleet.horizon, fleet.stage_minutes

        prices = self.section(doc, "prices")
        c_r = prices.get("renewable_price", 0.04)
        grid = self.series(prices.get("grid", {"tiers": [list(t) for t in DEFAULT_TARIFF]}), "prices.grid", n + 1, dt)

        ren_spec = doc.get("renewable", {"tiers": [["00:00", "24:00", 0.0]]})
        renewable_kw = self.series(ren_spec, "renewable", n, dt)
        if renewable_kw is not None and (renewable_kw < 0).any():
            self.err("renewable", "renewable power must be non-negative")

        deg = self.section(doc, "degradation")
        try:
            degradation = DegradationParams(**deg)
        except (ValueError, TypeError) as exc:
            self.err("degradation", str(exc))
            degradation = None

        sched = self.section(doc, "schedule")
        dw = sched.get("default_workload")
        workload = TruncatedNormalSpec(22.5, 5.0, 15.0, 30.0)
        if dw is not None:
            try:
                workload = TruncatedNormalSpec(dw["mu_min"], dw["sigma_min"], dw["lower_min"], dw["upper_min"])
            except (KeyError, TypeError, WorkloadError) as exc:
                self.err("schedule.default_workload", f"invalid workload spec: {exc}",
                         "give mu_min, sigma_min, lower_min, upper_min")
        flights = []
        if "file" in sched:
            p = self.base / sched["file"]
            if not p.exists():
                self.err("schedule.file", f"file not found: {p}")
            else:
                try:
                    flights = load_schedule(p, workload, dt, n)
                except WorkloadError as exc:
                    self.err("schedule.file", str(exc), "times are HH:MM on the stage grid within the day")
        else:
            self.err("schedule.file", "missing", "point to a flight schedule CSV")

        events = []
        for k, ev in enumerate(doc.get("events") or []):
            try:
                events.append(ScheduleEvent(ev.get("kind", "cancellation"), str(ev["flight_id"]),
                                            parse_hhmm(ev["announce_hhmm"], dt)))
            except (KeyError, TypeError, AttributeError):
                self.err(f"events[{k}]", "needs flight_id and announce_hhmm")
            except (WorkloadError, ScenarioError) as exc:
                self.err(f"events[{k}]", str(exc))

        pol = self.section(doc, "policy")
        try:
            rollout = RolloutConfig(
                workload_mode=pol.get("workload_mode", "certainty-equivalent"),
                samples=int(pol.get("samples", 1)),
                parallel_eval=bool(pol.get("parallel_eval", False)),
                seed=int(pol.get("seed", doc.get("seed", 0))),
            )
        except (ValueError, TypeError) as exc:
            self.err("policy", str(exc))
            rollout = None

        if self.diags or grid is None or renewable_kw is None or degradation is None or rollout is None:
            return None
        try:
            profiles = PriceAndRenewableProfiles(grid, float(c_r), renewable_kw * dt / 60.0)
            return Scenario(
                fleet=fleet, profiles=profiles, degradation=degradation, schedule=tuple(flights),
                events=tuple(events), seed=int(doc.get("seed", 0)), initial_soc=doc.get("initial_soc"),
                cycles_to_failure=float(doc.get("cycles_to_failure", 3000.0)), rollout=rollout,
                name=str(doc.get("name", self.path.parent.name)),
            )
        except (ScenarioError, ProfileError, ValueError) as exc:
            for part in str(exc).split("; "):
                self.err("scenario", part)
            return None


def validate_scenario(path) -> list[Diagnostic]:
    loader = _Loader(_resolve(Path(path)))
    loader.load()
    return loader.diags


def load_scenario(path) -> Scenario:
    loader = _Loader(_resolve(Path(path)))
    scenario = loader.load()
    if scenario is None:
        raise ScenarioFileError(loader.diags)
    return scenario


# -- parameter sweeps ---------------------------------------------------------------

def _fleet_setter(name: str, cast: Callable = float):
    def apply(s: Scenario, v):
        return replace(s, fleet=replace(s.fleet, **{name: cast(v)}))
    return apply


def _scale_renewable(s: Scenario, v):
    p = s.profiles
    return replace(s, profiles=PriceAndRenewableProfiles(p.grid_price, p.renewable_price, p.renewable_energy * float(v)))


def _renewable_price(s: Scenario, v):
    p = s.profiles
    return replace(s, profiles=PriceAndRenewableProfiles(p.grid_price, float(v), p.renewable_energy))


def _grid_spread(s: Scenario, v):
    """Scale every grid price's distance from the cheapest one by ``v``."""
    p = s.profiles
    lo = p.grid_price.min()
    return replace(s, profiles=PriceAndRenewableProfiles(lo + (p.grid_price - lo) * float(v),
                                                         p.renewable_price, p.renewable_energy))


SWEEPABLE: dict[str, Callable[[Scenario, Any], Scenario]] = {
    "n_ev": _fleet_setter("n_ev", int),
    "capacity_kwh": _fleet_setter("capacity_kwh"),
    "soc_min": _fleet_setter("soc_min"),
    "soc_max": _fleet_setter("soc_max"),
    "charge_power_kw": _fleet_setter("charge_power_kw"),
    "efficiency": _fleet_setter("efficiency"),
    "e_work": _fleet_setter("e_work_kwh_per_stage"),
    "d_thre": _fleet_setter("d_thre", int),
    "a0": lambda s, v: replace(s, degradation=replace(s.degradation, a0=float(v))),
    "a1": lambda s, v: replace(s, degradation=replace(s.degradation, a1=float(v))),
    "cycles_to_failure": lambda s, v: replace(s, cycles_to_failure=float(v)),
    "initial_soc": lambda s, v: replace(s, initial_soc=float(v)),
    "seed": lambda s, v: replace(s, seed=int(v)),
    "renewable_price": _renewable_price,
    "renewable_scale": _scale_renewable,
    "tariff_spread": _grid_spread,
}


def apply_param(scenario: Scenario, key: str, value) -> Scenario:
    if key not in SWEEPABLE:
        raise KeyError(f"unknown sweep key {key!r}; sweepable keys: {', '.join(sorted(SWEEPABLE))}")
    return SWEEPABLE[key](scenario, value)
