"""Base heuristics and the one-step-lookahead rollout controller.

Both heuristics share the work-assignment rule (highest-SoC free vehicle
serves the oldest waiting flight). They differ only in charging:

* ``renewable``: charge free vehicles lowest-SoC first while the fleet draw is
  below the renewable energy available in the stage;
* ``greedy``: charge every free vehicle that is not full.

Rollout scores each candidate joint control by its stage cost plus the cheaper
feasible heuristic's cost-to-go from the successor state and keeps the argmin.
Candidates fix the work assignment and vary only how many of the lowest-SoC
free vehicles charge, so there are at most ``n_free + 1`` per stage.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernel
from .costs import (CostBreakdown, DegradationParams, PriceAndRenewableProfiles, accumulate,
                    stage_cost_components, terminal_cost)
from .dynamics import (CHARGE, IDLE, WORK, ControlDecision, FleetParams, FleetState,
                       InfeasibleTransition, PendingFlight, can_start_work, charging_draw_kwh,
                       eligible_asevs, is_full, step)
from .workload import FlightEvent, discretize, expected_stages, sample

log = logging.getLogger(__name__)

GREEDY = "greedy"
RENEWABLE = "renewable"
ROLLOUT = "rollout"
POLICIES = (GREEDY, RENEWABLE, ROLLOUT)
HEURISTICS = (RENEWABLE, GREEDY)

CERTAINTY_EQUIVALENT = "certainty-equivalent"
MONTE_CARLO = "monte-carlo"

_KIND = {GREEDY: _kernel.GREEDY, RENEWABLE: _kernel.RENEWABLE}
EXHAUSTIVE_MAX_FLEET = 4


class NoFeasibleBaseHeuristic(RuntimeError):
    pass


class NoFeasibleCandidate(RuntimeError):
    def __init__(self, stage: int):
        super().__init__(f"all candidates infeasible at stage {stage}")
        self.stage = stage


@dataclass(frozen=True)
class PlannedFlight:
    """A future flight with a workload already fixed (expected or sampled)."""
    flight_id: str
    stage: int
    workload: int


@dataclass(frozen=True)
class RolloutConfig:
    workload_mode: str = CERTAINTY_EQUIVALENT
    samples: int = 1
    parallel_eval: bool = False
    exhaustive: bool = False
    seed: int = 0
    max_workers: Optional[int] = None

    def __post_init__(self):
        if self.workload_mode not in (CERTAINTY_EQUIVALENT, MONTE_CARLO):
            raise ValueError(f"unknown workload_mode {self.workload_mode!r}")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")


@dataclass
class StageRecord:
    stage: int
    controls: list[ControlDecision]
    energy: float
    degradation: float
    draw_kwh: float


@dataclass
class PolicyOutcome:
    feasible: bool
    cost_to_go: Optional[float]
    first_stage_controls: list[ControlDecision]
    trajectory: Optional[list[StageRecord]] = None
    heuristic: Optional[str] = None
    breakdown: Optional[CostBreakdown] = None
    failure: Optional[InfeasibleTransition] = field(default=None, repr=False)


def plan_flights(future_flights, dt: float = 5.0) -> list[PlannedFlight]:
    """Certainty-equivalent plan: FlightEvents get their expected stage count."""
    out = []
    for f in future_flights:
        if isinstance(f, PlannedFlight):
            out.append(f)
        else:
            out.append(PlannedFlight(f.flight_id, f.scheduled_stage, expected_stages(discretize(f.workload, dt))))
    out.sort(key=lambda f: (f.stage, f.flight_id))
    return out


def sample_plan(future_flights: Sequence[FlightEvent], rng: np.random.Generator, dt: float = 5.0):
    out = [PlannedFlight(f.flight_id, f.scheduled_stage, sample(discretize(f.workload, dt), rng))
           for f in future_flights]
    out.sort(key=lambda f: (f.stage, f.flight_id))
    return out


# -- decision rules -----------------------------------------------------------

def assign_work(fleet: FleetState, params: FleetParams) -> dict[int, str]:
    """Highest-SoC eligible vehicles take the oldest waiting flights."""
    eligible = eligible_asevs(fleet, params)
    n = min(len(eligible), len(fleet.pending))
    return {i: f.flight_id for i, f in zip(eligible[:n], fleet.pending[:n])}


def chargeable_asevs(fleet: FleetState, params: FleetParams, busy) -> list[int]:
    """Free, not-full vehicles outside ``busy``, lowest SoC first."""
    idx = [i for i, a in enumerate(fleet.asevs)
           if a.q >= 0 and i not in busy and not is_full(a.soc, params)]
    return sorted(idx, key=lambda i: (fleet.asevs[i].soc, i))


def _base_controls(fleet: FleetState, assignment: dict[int, str]) -> list[ControlDecision]:
    out = []
    for i, a in enumerate(fleet.asevs):
        if a.q <= -2:
            out.append(ControlDecision(WORK))
        elif i in assignment:
            out.append(ControlDecision(WORK, assignment[i]))
        else:
            out.append(ControlDecision(IDLE))
    return out


def heuristic_controls(kind: str, fleet: FleetState, profiles: PriceAndRenewableProfiles,
                       params: FleetParams) -> list[ControlDecision]:
    """One stage of a base heuristic applied to ``fleet`` (queue already updated)."""
    assignment = assign_work(fleet, params)
    controls = _base_controls(fleet, assignment)
    candidates = chargeable_asevs(fleet, params, assignment)
    if kind == GREEDY:
        for i in candidates:
            controls[i] = ControlDecision(CHARGE)
    elif kind == RENEWABLE:
        e_rt = float(profiles.renewable_energy[fleet.stage])
        if e_rt > 0:
            running = 0.0
            for i in candidates:
                controls[i] = ControlDecision(CHARGE)
                running += charging_draw_kwh(fleet.asevs[i].soc, params)
                if running >= e_rt:
                    break
    else:
        raise ValueError(f"unknown heuristic {kind!r}")
    return controls


def _arrivals(plan: Sequence[PlannedFlight], pos: int, t: int):
    """Flights from ``plan[pos:]`` that are waiting by stage ``t``."""
    new = []
    while pos < len(plan) and plan[pos].stage <= t:
        f = plan[pos]
        new.append(PendingFlight(f.flight_id, f.workload, t - f.stage, f.stage))
        pos += 1
    return new, pos


def simulate_heuristic(kind: str, start: FleetState, profiles: PriceAndRenewableProfiles,
                       params: FleetParams, future_flights=(), degradation: DegradationParams = DegradationParams(),
                       record: bool = True) -> PolicyOutcome:
    """Reference (uncompiled) run of a base heuristic from ``start`` to the terminal stage."""
    plan = plan_flights(future_flights, params.stage_minutes)
    fleet = start
    pos = 0
    costs: list[tuple[float, float]] = []
    records: list[StageRecord] = []
    first: list[ControlDecision] = []
    for t in range(start.stage, params.horizon):
        new, pos = _arrivals(plan, pos, t)
        if new:
            fleet = fleet.with_arrivals(new)
        controls = heuristic_controls(kind, fleet, profiles, params)
        if t == start.stage:
            first = controls
        energy, wear, draw = stage_cost_components(fleet, controls, profiles, params, degradation)
        try:
            nxt = step(fleet, controls, params)
        except InfeasibleTransition as exc:
            return PolicyOutcome(False, None, first, records if record else None, kind, failure=exc)
        costs.append((energy, wear))
        if record:
            records.append(StageRecord(t, controls, energy, wear, draw))
        fleet = nxt
    breakdown = accumulate(costs, terminal_cost(fleet, profiles, params))
    return PolicyOutcome(True, breakdown.total, first, records if record else None, kind, breakdown)


def heuristic_renewable_matching(start, profiles, params, future_flights=(), degradation=DegradationParams(),
                                 record=True) -> PolicyOutcome:
    return simulate_heuristic(RENEWABLE, start, profiles, params, future_flights, degradation, record)


def heuristic_greedy_charging(start, profiles, params, future_flights=(), degradation=DegradationParams(),
                              record=True) -> PolicyOutcome:
    return simulate_heuristic(GREEDY, start, profiles, params, future_flights, degradation, record)


def _pick(outcomes: dict[str, Optional[float]]) -> Optional[str]:
    """Cheaper feasible heuristic; greedy wins ties and is the fallback."""
    ren, gre = outcomes.get(RENEWABLE), outcomes.get(GREEDY)
    if ren is None and gre is None:
        return None
    if ren is None:
        return GREEDY
    if gre is None:
        return RENEWABLE
    return RENEWABLE if ren < gre else GREEDY


def select_base_heuristic(start, profiles, params, future_flights=(), degradation=DegradationParams()):
    """Return ``(tag, outcome)`` of the base heuristic used for cost-to-go."""
    outcomes = {
        RENEWABLE: heuristic_renewable_matching(start, profiles, params, future_flights, degradation),
        GREEDY: heuristic_greedy_charging(start, profiles, params, future_flights, degradation),
    }
    tag = _pick({k: o.cost_to_go for k, o in outcomes.items()})
    if tag is None:
        raise NoFeasibleBaseHeuristic(f"no feasible base heuristic from stage {start.stage}")
    return tag, outcomes[tag]


# -- compiled cost-to-go --------------------------------------------------------

class CostToGo:
    """Fast base-heuristic cost-to-go backed by the compiled kernel."""

    def __init__(self, profiles: PriceAndRenewableProfiles, params: FleetParams,
                 degradation: DegradationParams = DegradationParams()):
        self.params = params
        self.grid_price = np.ascontiguousarray(profiles.grid_price, dtype=np.float64)
        self.e_r = np.ascontiguousarray(profiles.renewable_energy, dtype=np.float64)
        self.packed = _kernel.pack_params(params, degradation, profiles.renewable_price)
        if len(self.e_r) != params.horizon:
            raise ValueError("profile horizon does not match fleet horizon")

    def _arrays(self, state: FleetState, plan: Sequence[PlannedFlight]):
        q = np.array([a.q for a in state.asevs], dtype=np.int64)
        soc = np.array([a.soc for a in state.asevs], dtype=np.float64)
        fr = np.array([a.cycles_to_failure for a in state.asevs], dtype=np.float64)
        t = state.stage
        # same FIFO key as FleetState.with_arrivals; the kernel checks delays via t - entry
        queue = [(f.entry_stage, f.flight_id, t - f.delay, f.remaining_workload) for f in state.pending]
        queue += [(f.stage, f.flight_id, f.stage, f.workload) for f in plan]
        queue.sort(key=lambda x: (x[0], x[1]))
        entry = np.array([x[2] for x in queue], dtype=np.int64)
        work = np.array([x[3] for x in queue], dtype=np.int64)
        return q, soc, fr, entry, work

    def evaluate(self, kind: str, state: FleetState, plan: Sequence[PlannedFlight]):
        """``(feasible, CostBreakdown or None, fail_stage)`` for one heuristic."""
        q, soc, fr, entry, work = self._arrays(state, plan)
        ok, energy, wear, terminal, fail = _kernel.simulate(
            _KIND[kind], state.stage, self.params.horizon, q, soc, fr, entry, work,
            self.grid_price, self.e_r, self.packed)
        if not ok:
            return False, None, int(fail)
        return True, CostBreakdown(energy, wear, terminal), -1

    def best(self, state: FleetState, plan: Sequence[PlannedFlight]) -> Optional[float]:
        """Cost-to-go of the selected base heuristic, ``None`` if neither is feasible."""
        vals = {}
        for kind in HEURISTICS:
            ok, bd, _ = self.evaluate(kind, state, plan)
            vals[kind] = bd.total if ok else None
        tag = _pick(vals)
        return None if tag is None else vals[tag]


# -- rollout ----------------------------------------------------------------------

def candidate_controls(fleet: FleetState, params: FleetParams, exhaustive: bool = False):
    """Joint controls considered by rollout at this stage."""
    if exhaustive:
        return _all_controls(fleet, params)
    assignment = assign_work(fleet, params)
    base = _base_controls(fleet, assignment)
    order = chargeable_asevs(fleet, params, assignment)
    out = []
    for k in range(len(order) + 1):
        controls = list(base)
        for i in order[:k]:
            controls[i] = ControlDecision(CHARGE)
        out.append(controls)
    return out


def _all_controls(fleet: FleetState, params: FleetParams):
    """Every joint control accepted by ``step``: any choice of which eligible
    vehicles serve the FIFO head, any matching, any charging subset of the rest."""
    n = len(fleet.asevs)
    if n > EXHAUSTIVE_MAX_FLEET:
        raise ValueError(f"exhaustive enumeration limited to {EXHAUSTIVE_MAX_FLEET} vehicles")
    eligible = [i for i, a in enumerate(fleet.asevs) if a.q >= 0 and can_start_work(a.soc, params)]
    n_serve = min(len(eligible), len(fleet.pending))
    head = [f.flight_id for f in fleet.pending[:n_serve]]
    out = []
    for workers in itertools.permutations(eligible, n_serve):
        assignment = dict(zip(workers, head))
        base = _base_controls(fleet, assignment)
        free = [i for i, a in enumerate(fleet.asevs)
                if a.q >= 0 and i not in assignment and not is_full(a.soc, params)]
        for mask in itertools.product((False, True), repeat=len(free)):
            controls = list(base)
            for i, on in zip(free, mask):
                if on:
                    controls[i] = ControlDecision(CHARGE)
            out.append(controls)
    return out


def _tie_key(controls: Sequence[ControlDecision], surplus: bool):
    n_charge = sum(c.u == CHARGE for c in controls)
    return (-n_charge if surplus else 0,
            tuple(c.u for c in controls),
            tuple(c.assignment or "" for c in controls))


def rollout_decide(current: FleetState, profiles: PriceAndRenewableProfiles, params: FleetParams,
                   future_flights=(), config: RolloutConfig = RolloutConfig(),
                   degradation: DegradationParams = DegradationParams(),
                   evaluator: Optional[CostToGo] = None) -> list[ControlDecision]:
    """Controls minimizing stage cost plus base-heuristic cost-to-go of the successor."""
    t = current.stage
    if t >= params.horizon:
        raise ValueError("no decision at the terminal stage")
    evaluator = evaluator or CostToGo(profiles, params, degradation)
    future = list(future_flights)

    if config.workload_mode == MONTE_CARLO:
        events = [f for f in future if isinstance(f, FlightEvent)]
        if len(events) != len(future):
            raise ValueError("monte-carlo mode needs FlightEvent futures")
        rng = np.random.default_rng([config.seed, t])
        plans = [sample_plan(events, rng, params.stage_minutes) for _ in range(config.samples)]
    else:
        plans = [plan_flights(future, params.stage_minutes)]

    candidates = candidate_controls(current, params, config.exhaustive)

    def score(controls):
        energy, wear, _ = stage_cost_components(current, controls, profiles, params, degradation)
        try:
            nxt = step(current, controls, params)
        except InfeasibleTransition:
            return None
        vals = []
        for plan in plans:
            j = evaluator.best(nxt, plan)
            if j is None:
                return None
            vals.append(j)
        return energy + wear + sum(vals) / len(vals)

    if config.parallel_eval and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=config.max_workers) as pool:
            scores = list(pool.map(score, candidates))
    else:
        scores = [score(c) for c in candidates]

    feasible = [(s, c) for s, c in zip(scores, candidates) if s is not None]
    if not feasible:
        raise NoFeasibleCandidate(t)
    best = min(s for s, _ in feasible)
    tol = 1e-9 * max(1.0, abs(best))
    surplus = float(profiles.renewable_energy[t]) > 0
    ties = [c for s, c in feasible if s <= best + tol]
    return min(ties, key=lambda c: _tie_key(c, surplus))


# -- closed-loop controllers ----------------------------------------------------------

class Controller:
    """Callable ``(fleet, future_flights) -> controls`` for one policy tag."""

    def __init__(self, policy: str, profiles: PriceAndRenewableProfiles, params: FleetParams,
                 degradation: DegradationParams = DegradationParams(), config: RolloutConfig = RolloutConfig()):
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}; choose from {', '.join(POLICIES)}")
        self.policy = policy
        self.profiles = profiles
        self.params = params
        self.degradation = degradation
        self.config = config
        self.fallbacks: list[int] = []
        self._evaluator = CostToGo(profiles, params, degradation) if policy == ROLLOUT else None

    def __call__(self, fleet: FleetState, future_flights) -> list[ControlDecision]:
        if self.policy != ROLLOUT:
            return heuristic_controls(self.policy, fleet, self.profiles, self.params)
        try:
            return rollout_decide(fleet, self.profiles, self.params, future_flights, self.config,
                                  self.degradation, self._evaluator)
        except NoFeasibleCandidate:
            # predicted infeasible under the planned workloads; charge everything and carry on
            log.warning("rollout: no feasible candidate at stage %d, using greedy step", fleet.stage)
            self.fallbacks.append(fleet.stage)
            return heuristic_controls(GREEDY, fleet, self.profiles, self.params)


def run_policy(policy: str, scenario, config: Optional[RolloutConfig] = None):
    """Closed-loop day under ``policy``; see ``asev.sim.run``."""
    from .sim import run
    return run(scenario, policy, config)
