"""Closed-loop day simulation, schedule changes, reports and an exact DP oracle."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _kernel
from .costs import (CostBreakdown, DegradationParams, PriceAndRenewableProfiles, accumulate,
                    stage_cost_components, terminal_cost)
from .dynamics import (CHARGE, WORK, FleetParams, FleetState, InfeasibleTransition, PendingFlight,
                       step)
from .policies import Controller, RolloutConfig
from .workload import FlightEvent, discretize, format_hhmm, sample

log = logging.getLogger(__name__)


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScheduleEvent:
    kind: str
    flight_id: str
    announce_stage: int

    def __post_init__(self):
        if self.kind != "cancellation":
            raise ScenarioError(f"unsupported schedule event {self.kind!r}")


@dataclass(frozen=True, eq=False)
class Scenario:
    fleet: FleetParams
    profiles: PriceAndRenewableProfiles
    degradation: DegradationParams = DegradationParams()
    schedule: tuple[FlightEvent, ...] = ()
    events: tuple[ScheduleEvent, ...] = ()
    seed: int = 0
    initial_soc: Optional[float] = None
    cycles_to_failure: float = 3000.0
    rollout: RolloutConfig = RolloutConfig()
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "schedule", tuple(sorted(self.schedule, key=lambda e: (e.scheduled_stage, e.flight_id))))
        object.__setattr__(self, "events", tuple(self.events))
        problems = self.problems()
        if problems:
            raise ScenarioError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        n = self.fleet.horizon
        if self.profiles.horizon != n:
            out.append(f"profile length {self.profiles.horizon} ≠ horizon {n}")
        ids = [f.flight_id for f in self.schedule]
        if len(set(ids)) != len(ids):
            out.append("duplicate flight_id in schedule")
        by_id = {f.flight_id: f for f in self.schedule}
        for f in self.schedule:
            if not 0 <= f.scheduled_stage < n:
                out.append(f"flight {f.flight_id}: stage out of horizon")
        for e in self.events:
            f = by_id.get(e.flight_id)
            if f is None:
                out.append(f"event for unknown flight {e.flight_id}")
            elif not 0 <= e.announce_stage <= f.scheduled_stage:
                out.append(f"cancellation of {e.flight_id} announced at stage {e.announce_stage}, "
                           f"after its scheduled stage {f.scheduled_stage}")
        soc0 = self.start_soc
        if not 0 <= soc0 <= self.fleet.soc_max:
            out.append(f"initial_soc {soc0} outside [0, soc_max]")
        return out

    @property
    def start_soc(self) -> float:
        return self.fleet.soc_max if self.initial_soc is None else self.initial_soc

    def initial_state(self) -> FleetState:
        return FleetState.initial(self.fleet, self.start_soc, self.cycles_to_failure)

    def with_changes(self, **kw) -> "Scenario":
        return replace(self, **kw)


def flight_rng(seed: int, flight_id: str) -> np.random.Generator:
    """Workload substream for one flight; independent of every other flight."""
    key = zlib.crc32(flight_id.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(key,)))


def realize_workloads(scenario: Scenario) -> dict[str, int]:
    dt = scenario.fleet.stage_minutes
    return {f.flight_id: sample(discretize(f.workload, dt), flight_rng(scenario.seed, f.flight_id))
            for f in scenario.schedule}


@dataclass
class SimReport:
    policy: str
    cost: CostBreakdown
    timelines: list[list[dict]]
    load_curve: list[float]
    service_log: list[dict]
    feasible: bool
    stage_energy: list[float] = field(default_factory=list)
    stage_degradation: list[float] = field(default_factory=list)
    failure: Optional[dict] = None
    warnings: list[str] = field(default_factory=list)
    stage_minutes: float = 5.0

    def to_dict(self) -> dict:
        """JSON-ready view with fixed rounding (2 dp money, 4 dp kWh)."""
        dt = self.stage_minutes
        return {
            "policy": self.policy,
            "feasible": self.feasible,
            "failure": self.failure,
            "cost": {k: round(v, 2) for k, v in self.cost.as_dict().items()},
            "load_curve_kwh": [round(x, 4) for x in self.load_curve],
            "service_log": [dict(r, start=format_hhmm(r["start_stage"], dt)) for r in self.service_log],
            "timelines": [[dict(iv, start=format_hhmm(iv["start_stage"], dt), end=format_hhmm(iv["end_stage"], dt))
                           for iv in tl] for tl in self.timelines],
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def summary(self, currency: str = "£") -> str:
        c = self.cost
        return (f"{self.policy} total={currency}{c.total:.2f} energy={currency}{c.energy:.2f} "
                f"degradation={currency}{c.degradation:.2f} terminal={currency}{c.terminal:.2f} "
                f"feasible={str(self.feasible).lower()}")

    def write(self, out_dir) -> list[Path]:
        """JSON report plus per-vehicle timeline, load curve and service log CSVs."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        dt = self.stage_minutes
        written = []
        p = out / "report.json"
        p.write_text(self.to_json())
        written.append(p)
        width = len(str(max(len(self.timelines) - 1, 0)))
        for i, tl in enumerate(self.timelines):
            p = out / f"timeline_{i:0{width}d}.csv"
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["start_hhmm", "end_hhmm", "mode"])
                for iv in tl:
                    w.writerow([format_hhmm(iv["start_stage"], dt), format_hhmm(iv["end_stage"], dt), iv["mode"]])
            written.append(p)
        p = out / "load_curve.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["stage", "kwh"])
            for n, x in enumerate(self.load_curve):
                w.writerow([n, f"{x:.4f}"])
        written.append(p)
        p = out / "service_log.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["flight_id", "asev", "start_hhmm", "start_stage", "workload", "delay"])
            for r in self.service_log:
                w.writerow([r["flight_id"], r["asev"], format_hhmm(r["start_stage"], dt), r["start_stage"],
                            r["workload"], r["delay"]])
        written.append(p)
        return written


def _mode(q: int, u: int) -> str:
    if u == WORK or q < 0:
        return "work"
    return "charge" if u == CHARGE else "idle"


def _intervals(modes: Sequence[str]) -> list[dict]:
    out = []
    for mode, grp in itertools.groupby(enumerate(modes), key=lambda x: x[1]):
        grp = list(grp)
        out.append({"start_stage": grp[0][0], "end_stage": grp[-1][0] + 1, "mode": mode})
    return out


def run(scenario: Scenario, policy: str, config: Optional[RolloutConfig] = None) -> SimReport:
    """Simulate one day online: at each stage reveal arrivals, decide, advance."""
    params = scenario.fleet
    profiles = scenario.profiles
    config = config or scenario.rollout
    controller = Controller(policy, profiles, params, scenario.degradation, config)
    realized = realize_workloads(scenario)

    events_at: dict[int, list[ScheduleEvent]] = {}
    for e in scenario.events:
        events_at.setdefault(e.announce_stage, []).append(e)

    future = list(scenario.schedule)
    cancelled: set[str] = set()
    served: set[str] = set()
    warnings: list[str] = []
    fleet = scenario.initial_state()
    n = params.n_ev
    modes: list[list[str]] = [[] for _ in range(n)]
    load: list[float] = []
    costs: list[tuple[float, float]] = []
    service: list[dict] = []
    failure = None

    for t in range(params.horizon):
        for e in events_at.get(t, ()):
            if e.flight_id in served:
                msg = f"stage {t}: cancellation of {e.flight_id} ignored, flight already served"
                log.warning(msg)
                warnings.append(msg)
                continue
            cancelled.add(e.flight_id)
            fleet = fleet.without_flight(e.flight_id)
            future = [f for f in future if f.flight_id != e.flight_id]

        arriving = [f for f in future if f.scheduled_stage <= t]
        if arriving:
            future = [f for f in future if f.scheduled_stage > t]
            fleet = fleet.with_arrivals(
                PendingFlight(f.flight_id, realized[f.flight_id], t - f.scheduled_stage, f.scheduled_stage)
                for f in arriving)

        controls = controller(fleet, future)
        energy, wear, draw = stage_cost_components(fleet, controls, profiles, params, scenario.degradation)
        try:
            nxt = step(fleet, controls, params)
        except InfeasibleTransition as exc:
            failure = {"stage": t, "time": format_hhmm(t, params.stage_minutes),
                       "flight_id": exc.flight_id, "asev": exc.asev, "reason": str(exc)}
            break
        by_id = {f.flight_id: f for f in fleet.pending}
        for i, (a, c) in enumerate(zip(fleet.asevs, controls)):
            modes[i].append(_mode(a.q, c.u))
            if c.u == WORK and a.q >= 0:
                f = by_id[c.assignment]
                served.add(f.flight_id)
                service.append({"flight_id": f.flight_id, "asev": i, "start_stage": t,
                                "workload": f.remaining_workload, "delay": f.delay})
        load.append(draw)
        costs.append((energy, wear))
        fleet = nxt

    feasible = failure is None
    terminal = terminal_cost(fleet, profiles, params) if feasible else 0.0
    report = SimReport(
        policy=policy,
        cost=accumulate(costs, terminal),
        timelines=[_intervals(m) for m in modes],
        load_curve=load,
        service_log=service,
        feasible=feasible,
        stage_energy=[e for e, _ in costs],
        stage_degradation=[d for _, d in costs],
        failure=failure,
        warnings=warnings + [f"stage {s}: rollout had no feasible candidate, greedy step used"
                             for s in controller.fallbacks],
        stage_minutes=params.stage_minutes,
    )
    return report


def compare(scenario: Scenario, policies: Sequence[str], config: Optional[RolloutConfig] = None) -> list[SimReport]:
    """Run several policies on identical workload realizations."""
    return [run(scenario, p, config) for p in policies]


# -- exact dynamic programming oracle -----------------------------------------

ORACLE_MAX_FLEET = 3
ORACLE_MAX_HORIZON = 20


def exact_dp_oracle(scenario: Scenario) -> float:
    """Minimum day cost by exhaustive dynamic programming (tiny deterministic instances).

    Forward induction over every reachable state, keeping the cheapest
    cost-so-far of each; compiled and written independently of
    ``dynamics.step`` so it can serve as a check on the simulator. Exact
    reductions: vehicles share one cost model (states hold sorted vehicles),
    charging and idle vehicles face the same options, and with FIFO service
    and known arrivals the queue is just the number of flights served.
    Returns ``inf`` when no control sequence is feasible.
    """
    params = scenario.fleet
    if params.n_ev > ORACLE_MAX_FLEET or params.horizon > ORACLE_MAX_HORIZON:
        raise ScenarioError(f"instance too large: n_ev={params.n_ev}, horizon={params.horizon} "
                            f"(caps {ORACLE_MAX_FLEET}, {ORACLE_MAX_HORIZON})")
    if any(not f.workload.deterministic for f in scenario.schedule):
        raise ScenarioError("oracle needs deterministic workloads (sigma = 0)")
    if scenario.events:
        raise ScenarioError("oracle does not model schedule events")

    realized = realize_workloads(scenario)
    work = np.array([realized[f.flight_id] for f in scenario.schedule], dtype=np.int64)
    if work.size and work.max() > _kernel.ORACLE_MAX_WORK:
        raise ScenarioError(f"oracle supports workloads up to {_kernel.ORACLE_MAX_WORK} stages")
    stages = np.array([f.scheduled_stage for f in scenario.schedule], dtype=np.int64)
    packed = _kernel.pack_params(params, scenario.degradation, scenario.profiles.renewable_price)
    return float(_kernel.dp_oracle(
        params.n_ev, params.horizon, float(scenario.start_soc), stages, work,
        np.ascontiguousarray(scenario.profiles.grid_price, dtype=np.float64),
        np.ascontiguousarray(scenario.profiles.renewable_energy, dtype=np.float64),
        packed, float(scenario.cycles_to_failure)))
