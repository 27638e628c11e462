"""Per-vehicle hybrid state and the fleet transition.

Mode ``q``: 1 charging, 0 idle, ``-k`` working with ``k`` stages left.
SoC is stored as a fraction of capacity; energy terms are divided by
capacity when applied.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Optional, Sequence

WORK, IDLE, CHARGE = -1, 0, 1

# tolerance for "battery is full" and "battery is at soc_min" comparisons
SOC_TOL = 1e-9
_DEPLETION_TOL = 1e-12


class DynamicsError(ValueError):
    """A control or state violates a precondition of the transition."""


class InfeasibleTransition(Exception):
    """The trajectory cannot continue: base class for the two terminal errors."""

    def __init__(self, message: str, stage: int, flight_id: Optional[str] = None, asev: Optional[int] = None):
        super().__init__(message)
        self.stage = stage
        self.flight_id = flight_id
        self.asev = asev


class DelayThresholdViolated(InfeasibleTransition):
    pass


class BatteryDepleted(InfeasibleTransition):
    pass


@dataclass(frozen=True)
class FleetParams:
    n_ev: int = 25
    capacity_kwh: float = 50.0
    soc_min: float = 0.2
    soc_max: float = 0.8
    charge_power_kw: float = 22.0
    efficiency: float = 0.9
    e_work_kwh_per_stage: float = 2.0
    d_thre: int = 1
    horizon: int = 288
    stage_minutes: float = 5.0

    def __post_init__(self):
        if self.n_ev < 1:
            raise DynamicsError("n_ev must be >= 1")
        if not 0 <= self.soc_min < self.soc_max <= 1:
            raise DynamicsError("need 0 <= soc_min < soc_max <= 1")
        if not 0 < self.efficiency <= 1:
            raise DynamicsError("efficiency must be in (0, 1]")
        if min(self.capacity_kwh, self.charge_power_kw, self.e_work_kwh_per_stage, self.stage_minutes) <= 0:
            raise DynamicsError("capacity, charge power, work energy and stage length must be positive")
        if self.d_thre < 0 or self.horizon < 1:
            raise DynamicsError("d_thre must be >= 0 and horizon >= 1")

    @property
    def e_charge_kwh(self) -> float:
        """Energy drawn per charging stage at constant power (before losses)."""
        return self.charge_power_kw * self.stage_minutes / 60.0

    @property
    def charge_step(self) -> float:
        return self.efficiency * self.e_charge_kwh / self.capacity_kwh

    @property
    def work_step(self) -> float:
        return self.e_work_kwh_per_stage / self.capacity_kwh


@dataclass(frozen=True)
class AsevState:
    q: int
    soc: float
    cycles_to_failure: float = 3000.0

    def __post_init__(self):
        if self.q > 1:
            raise DynamicsError(f"invalid mode q={self.q}")
        if self.cycles_to_failure <= 0:
            raise DynamicsError("cycles_to_failure must be positive")

    @property
    def working(self) -> bool:
        return self.q < 0


@dataclass(frozen=True)
class PendingFlight:
    flight_id: str
    remaining_workload: int
    delay: int = 0
    entry_stage: int = 0

    def __post_init__(self):
        if self.remaining_workload <= 0:
            raise DynamicsError(f"flight {self.flight_id}: workload must be positive")


@dataclass(frozen=True)
class FleetState:
    stage: int
    asevs: tuple[AsevState, ...]
    pending: tuple[PendingFlight, ...] = ()

    @classmethod
    def initial(cls, params: FleetParams, soc: Optional[float] = None, cycles_to_failure: float = 3000.0):
        soc = params.soc_max if soc is None else soc
        return cls(0, tuple(AsevState(IDLE, soc, cycles_to_failure) for _ in range(params.n_ev)))

    def with_arrivals(self, flights: Iterable[PendingFlight]) -> "FleetState":
        """Append newly waiting flights, keeping the queue FIFO by (entry stage, id)."""
        queue = list(self.pending) + list(flights)
        queue.sort(key=lambda f: (f.entry_stage, f.flight_id))
        return replace(self, pending=tuple(queue))

    def without_flight(self, flight_id: str) -> "FleetState":
        return replace(self, pending=tuple(f for f in self.pending if f.flight_id != flight_id))


@dataclass(frozen=True)
class ControlDecision:
    u: int
    assignment: Optional[str] = None

    def __post_init__(self):
        if self.u not in (WORK, IDLE, CHARGE):
            raise DynamicsError(f"control must be -1, 0 or 1, got {self.u}")


def is_full(soc: float, params: FleetParams) -> bool:
    return soc >= params.soc_max - SOC_TOL


def can_start_work(soc: float, params: FleetParams) -> bool:
    return soc > params.soc_min + SOC_TOL


def charge_increment(soc: float, params: FleetParams) -> float:
    """SoC gained by one charging stage, clamped at soc_max."""
    room = params.soc_max - soc
    step = params.charge_step
    return room if step >= room - SOC_TOL else step


def charged_soc(soc: float, params: FleetParams) -> float:
    room = params.soc_max - soc
    return params.soc_max if params.charge_step >= room - SOC_TOL else soc + params.charge_step


def charging_draw_kwh(soc: float, params: FleetParams) -> float:
    """Energy billed for one charging stage: delivered energy over efficiency (<= E_c)."""
    return charge_increment(soc, params) * params.capacity_kwh / params.efficiency


def feasible_controls(fleet: FleetState, params: FleetParams, i: int) -> frozenset[int]:
    a = fleet.asevs[i]
    if a.q <= -2:
        return frozenset({WORK})
    if a.q == -1:
        return frozenset({IDLE})
    out = {IDLE}
    if fleet.pending and can_start_work(a.soc, params):
        out.add(WORK)
    if not is_full(a.soc, params):
        out.add(CHARGE)
    return frozenset(out)


def eligible_asevs(fleet: FleetState, params: FleetParams) -> list[int]:
    """Free vehicles able to start work, highest SoC first (lower index wins ties)."""
    idx = [i for i, a in enumerate(fleet.asevs) if a.q >= 0 and can_start_work(a.soc, params)]
    return sorted(idx, key=lambda i: (-fleet.asevs[i].soc, i))


def step(
    fleet: FleetState,
    controls: Sequence[ControlDecision],
    params: FleetParams,
    realized_workloads: Optional[Mapping[str, int]] = None,
) -> FleetState:
    """Advance the fleet one stage.

    Raises ``DynamicsError`` for malformed controls, ``DelayThresholdViolated``
    when a waiting flight would exceed ``d_thre`` and ``BatteryDepleted`` when a
    working vehicle would drop below zero SoC.
    """
    n = len(fleet.asevs)
    if len(controls) != n:
        raise DynamicsError(f"expected {n} controls, got {len(controls)}")
    t = fleet.stage
    if t >= params.horizon:
        raise DynamicsError("fleet already at terminal stage")

    by_id = {f.flight_id: f for f in fleet.pending}
    fresh: dict[str, int] = {}
    for i, (a, c) in enumerate(zip(fleet.asevs, controls)):
        if c.u not in feasible_controls(fleet, params, i):
            raise DynamicsError(f"stage {t}: control {c.u} infeasible for ASEV {i} (q={a.q}, soc={a.soc:.4f})")
        if c.u == WORK and a.q >= 0:
            if c.assignment not in by_id:
                raise DynamicsError(f"stage {t}: ASEV {i} assigned to unknown flight {c.assignment!r}")
            if c.assignment in fresh:
                raise DynamicsError(f"stage {t}: flight {c.assignment} assigned twice")
            fresh[c.assignment] = i

    n_eligible = len(eligible_asevs(fleet, params))
    required = min(len(fleet.pending), n_eligible)
    if len(fresh) != required:
        raise DynamicsError(f"stage {t}: {len(fresh)} assignments, mandatory service requires {required}")
    head = {f.flight_id for f in fleet.pending[:required]}
    if set(fresh) != head:
        raise DynamicsError(f"stage {t}: assignments must serve the queue in FIFO order")

    realized = realized_workloads or {}
    asevs = []
    for i, (a, c) in enumerate(zip(fleet.asevs, controls)):
        if a.q >= 0 and c.u == WORK:
            w = int(realized.get(c.assignment, by_id[c.assignment].remaining_workload))
            q, soc = -w, a.soc - params.work_step
        elif a.q <= -2:
            q, soc = a.q + 1, a.soc - params.work_step
        elif a.q == -1:
            q, soc = IDLE, a.soc
        elif c.u == CHARGE:
            q, soc = CHARGE, charged_soc(a.soc, params)
        else:
            q, soc = IDLE, a.soc
        if soc < -_DEPLETION_TOL:
            raise BatteryDepleted(f"battery depleted: ASEV {i} at stage {t}", t, asev=i)
        asevs.append(AsevState(q, soc, a.cycles_to_failure))

    pending = []
    for f in fleet.pending:
        if f.flight_id in fresh:
            continue
        d = f.delay + 1
        if d > params.d_thre:
            raise DelayThresholdViolated(
                f"delay threshold violated: flight {f.flight_id} unserved for {d} stage(s) at stage {t}",
                t, flight_id=f.flight_id)
        pending.append(replace(f, delay=d))

    return FleetState(t + 1, tuple(asevs), tuple(pending))
