"""
How far from optimal?
=====================

For 1-3 vehicles and up to 20 stages every control sequence can be
searched. Exact optimum <= rollout <= the base rule it was built on.
"""

import numpy as np

from asev import (DegradationParams, FleetParams, FlightEvent, PriceAndRenewableProfiles, Scenario,
                  TruncatedNormalSpec, compare, exact_dp_oracle)


def fixed(k):
    # sigma = 0: the flight takes exactly k stages
    return TruncatedNormalSpec(mu=5 * k + 2.5, sigma=0.0, lower=5 * k, upper=5 * k + 5)


rng = np.random.default_rng(42)
print(" n   N  flights   optimum   rollout    greedy   gap")
for trial in range(8):
    n, horizon = int(rng.integers(1, 4)), int(rng.integers(10, 21))
    stages = sorted(rng.integers(0, horizon - 2, int(rng.integers(1, 5))))
    schedule = tuple(FlightEvent(f"F{j}", "arrival", int(s), fixed(int(rng.integers(1, 4))))
                     for j, s in enumerate(stages))
    grid = np.where(np.arange(horizon + 1) < horizon // 2, 0.08, 0.16)
    profiles = PriceAndRenewableProfiles(grid, 0.04, rng.uniform(0, 2, horizon))
    sc = Scenario(FleetParams(n_ev=n, horizon=horizon), profiles, DegradationParams(), schedule,
                  initial_soc=float(rng.uniform(0.4, 0.8)))
    (greedy,) = compare(sc, ["greedy"])
    if not greedy.feasible:
        print(f"{n:2d} {horizon:3d} {len(schedule):8d}   (greedy infeasible, skipped)")
        continue
    (rollout,) = compare(sc, ["rollout"])
    opt = exact_dp_oracle(sc)
    gap = max(rollout.cost.total / opt - 1, 0.0) if opt > 0 else 0.0
    print(f"{n:2d} {horizon:3d} {len(schedule):8d} {opt:9.4f} {rollout.cost.total:9.4f} "
          f"{greedy.cost.total:9.4f} {gap:6.1%}")
