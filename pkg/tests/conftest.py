import time

import pytest

from asev.scenario import bundled_scenario, load_scenario
from asev.sim import run

CRITERIA = {
    "C1": "rollout never worse than its base heuristic (deterministic, random fleets)",
    "C2": "exact DP <= rollout <= base heuristic on tiny instances",
    "C3": "summer day: rollout 5-15% cheaper, less energy, more degradation",
    "C4": "renewable matching infeasible on both seasons; greedy and rollout feasible",
    "C5": "greedy terminal cost 0.00, rollout terminal cost > 0 on both seasons",
    "C6": "short-notice cancellation: feasible, 5-15% saving, rollout total not higher",
    "C7": "workload discretization and sampling",
    "C8": "step() invariants under 10^6 fuzzed calls",
    "C9": "byte-identical CLI outputs and parallel-eval invariance",
}
_results: dict = {}


@pytest.fixture
def criterion():
    """``record(cid, ok, detail)`` stores a line for the end-of-run acceptance summary."""
    def record(cid, ok, detail=""):
        _results[cid] = (bool(ok), detail)
        print(f"{cid} {'PASS' if ok else 'FAIL'}: {CRITERIA[cid]} -- {detail}")
        return ok
    return record


class _BristolRuns:
    """Session cache of full-day runs on the bundled scenarios."""

    def __init__(self):
        self._scenarios = {}
        self._reports = {}
        self.seconds = {}

    def scenario(self, name):
        if name not in self._scenarios:
            self._scenarios[name] = load_scenario(bundled_scenario(name))
        return self._scenarios[name]

    def __call__(self, name, policy):
        key = (name, policy)
        if key not in self._reports:
            t0 = time.perf_counter()
            self._reports[key] = run(self.scenario(name), policy)
            self.seconds[key] = time.perf_counter() - t0
        return self._reports[key]


@pytest.fixture(scope="session")
def bristol():
    return _BristolRuns()


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for cid, text in CRITERIA.items():
        if cid in _results:
            ok, detail = _results[cid]
            terminalreporter.write_line(f"{cid} {'PASS' if ok else 'FAIL'}  {text}  [{detail}]")
        else:
            terminalreporter.write_line(f"{cid} NOT RUN  {text}")
