import pytest
from hypothesis import given, settings, strategies as st

from asev.dynamics import (CHARGE, IDLE, WORK, AsevState, BatteryDepleted, ControlDecision, DelayThresholdViolated,
                           DynamicsError, FleetParams, FleetState, PendingFlight, eligible_asevs, feasible_controls,
                           step)

P = FleetParams(n_ev=3)


def fleet_of(*states, pending=(), stage=0):
    return FleetState(stage, tuple(AsevState(q, s) for q, s in states), tuple(pending))


def idle():
    return ControlDecision(IDLE)


class TestFeasibleControls:
    def test_working_is_forced(self):
        assert feasible_controls(fleet_of((-3, 0.5)), P, 0) == {WORK}

    def test_finishing_job_rolls_to_idle(self):
        assert feasible_controls(fleet_of((-1, 0.5)), P, 0) == {IDLE}

    def test_at_soc_min_cannot_work(self):
        f = fleet_of((0, 0.2), pending=[PendingFlight("A", 3)])
        assert feasible_controls(f, P, 0) == {IDLE, CHARGE}

    def test_full_and_no_flights(self):
        assert feasible_controls(fleet_of((0, 0.8)), P, 0) == {IDLE}

    def test_full_with_flight(self):
        f = fleet_of((0, 0.8), pending=[PendingFlight("A", 3)])
        assert feasible_controls(f, P, 0) == {IDLE, WORK}

    def test_middle(self):
        f = fleet_of((1, 0.5), pending=[PendingFlight("A", 3)])
        assert feasible_controls(f, P, 0) == {IDLE, WORK, CHARGE}


class TestEligible:
    def test_order_with_index_tiebreak(self):
        assert eligible_asevs(fleet_of((0, 0.8), (0, 0.5), (0, 0.8)), P) == [0, 2, 1]

    def test_all_working(self):
        assert eligible_asevs(fleet_of((-2, 0.8), (-1, 0.5), (-4, 0.8)), P) == []

    def test_soc_min_excluded(self):
        assert eligible_asevs(fleet_of((0, 0.2), (1, 0.3)), P) == [1]


class TestStep:
    def test_charge_clamps_at_soc_max(self):
        nxt = step(fleet_of((0, 0.8 - 0.001)), [ControlDecision(CHARGE)], P)
        assert nxt.asevs[0] == AsevState(CHARGE, 0.8)

    def test_charge_increment(self):
        nxt = step(fleet_of((0, 0.5)), [ControlDecision(CHARGE)], P)
        assert nxt.asevs[0].soc == pytest.approx(0.5 + 0.9 * 22 * 5 / 60 / 50, abs=1e-15)

    def test_greedy_top_off_from_0767(self):
        nxt = step(fleet_of((0, 0.767)), [ControlDecision(CHARGE)], P)
        assert nxt.asevs[0].soc == 0.8

    def test_idle_identity(self):
        f = fleet_of((0, 0.55))
        nxt = step(f, [idle()], P)
        assert nxt.asevs == f.asevs and nxt.stage == 1

    def test_work_discharge(self):
        f = fleet_of((0, 0.5), pending=[PendingFlight("A", 3)])
        nxt = step(f, [ControlDecision(WORK, "A")], P)
        assert nxt.asevs[0].q == -3
        assert nxt.asevs[0].soc == pytest.approx(0.46, abs=1e-15)
        assert nxt.pending == ()

    def test_job_runs_exactly_k_discharges(self):
        f = fleet_of((0, 0.8), pending=[PendingFlight("A", 3)])
        f = step(f, [ControlDecision(WORK, "A")], P)
        qs = [f.asevs[0].q]
        while f.asevs[0].q != IDLE:
            u = WORK if f.asevs[0].q <= -2 else IDLE
            f = step(f, [ControlDecision(u)], P)
            qs.append(f.asevs[0].q)
        assert qs == [-3, -2, -1, 0]
        assert f.asevs[0].soc == pytest.approx(0.8 - 3 * 0.04, abs=1e-12)

    def test_realized_workload_overrides(self):
        f = fleet_of((0, 0.8), pending=[PendingFlight("A", 3)])
        assert step(f, [ControlDecision(WORK, "A")], P, {"A": 5}).asevs[0].q == -5

    def test_mandatory_service(self):
        f = fleet_of((0, 0.8), pending=[PendingFlight("A", 3)])
        with pytest.raises(DynamicsError, match="mandatory service"):
            step(f, [idle()], P)

    def test_fifo(self):
        f = fleet_of((0, 0.8), pending=[PendingFlight("A", 3, entry_stage=0), PendingFlight("B", 3, entry_stage=1)])
        with pytest.raises(DynamicsError, match="FIFO"):
            step(f, [ControlDecision(WORK, "B")], P, )

    def test_double_assignment(self):
        f = fleet_of((0, 0.8), (0, 0.8), pending=[PendingFlight("A", 3)])
        with pytest.raises(DynamicsError, match="twice"):
            step(f, [ControlDecision(WORK, "A"), ControlDecision(WORK, "A")], P)

    def test_infeasible_control(self):
        with pytest.raises(DynamicsError, match="infeasible"):
            step(fleet_of((-2, 0.5)), [idle()], P)

    def test_delay_threshold(self):
        p = FleetParams(n_ev=1, d_thre=1)
        f = fleet_of((-3, 0.5), pending=[PendingFlight("A", 3)])
        f = step(f, [ControlDecision(WORK)], p)
        assert f.pending[0].delay == 1
        with pytest.raises(DelayThresholdViolated, match="delay threshold violated") as exc:
            step(f, [ControlDecision(WORK)], p)
        assert exc.value.flight_id == "A"

    def test_battery_depleted(self):
        with pytest.raises(BatteryDepleted, match="battery depleted"):
            step(fleet_of((-3, 0.01)), [ControlDecision(WORK)], P)

    def test_terminal_stage(self):
        with pytest.raises(DynamicsError):
            step(fleet_of((0, 0.5), stage=P.horizon), [idle()], P)


@st.composite
def fleets_and_controls(draw):
    n = draw(st.integers(1, 4))
    asevs = []
    for _ in range(n):
        q = draw(st.integers(-5, 1))
        asevs.append(AsevState(q, draw(st.floats(0.25, 0.8))))
    n_p = draw(st.integers(0, 3))
    pending = tuple(PendingFlight(f"F{k}", draw(st.integers(1, 5)), 0, k) for k in range(n_p))
    fleet = FleetState(0, tuple(asevs), pending)
    params = FleetParams(n_ev=n, d_thre=3)
    eligible = eligible_asevs(fleet, params)
    assign = dict(zip(eligible, (f.flight_id for f in pending)))
    controls = []
    for i, a in enumerate(asevs):
        if i in assign:
            controls.append(ControlDecision(WORK, assign[i]))
        elif a.q <= -2:
            controls.append(ControlDecision(WORK))
        elif a.q == -1:
            controls.append(idle())
        else:
            opts = sorted(feasible_controls(fleet, params, i) - {WORK})
            controls.append(ControlDecision(draw(st.sampled_from(opts))))
    return fleet, controls, params


@given(fleets_and_controls())
@settings(max_examples=300, deadline=None)
def test_step_properties(case):
    fleet, controls, params = case
    nxt = step(fleet, controls, params)
    assert nxt == step(fleet, controls, params)  # pure
    served = {c.assignment for c, a in zip(controls, fleet.asevs) if c.u == WORK and a.q >= 0}
    assert served.isdisjoint(f.flight_id for f in nxt.pending)
    assert len(served) + len(nxt.pending) == len(fleet.pending)
    for a, b, c in zip(fleet.asevs, nxt.asevs, controls):
        assert b.soc <= params.soc_max + 1e-9
        if a.q <= -2:
            assert b.q == a.q + 1
        elif a.q == -1:
            assert b.q == IDLE and b.soc == a.soc
        elif c.u == IDLE:
            assert b == AsevState(IDLE, a.soc)
