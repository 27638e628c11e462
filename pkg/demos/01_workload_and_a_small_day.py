"""
Workloads, one small fleet, three controllers
=============================================

How long a flight keeps a luggage trailer busy is random. We turn the
minutes into a distribution over 5-minute stages, then run a 4-vehicle
morning under the two simple charging rules and under rollout.
"""

import numpy as np

from asev import (FleetParams, FlightEvent, PriceAndRenewableProfiles, Scenario, TruncatedNormalSpec,
                  compare, discretize, expected_stages, sample)

# 15-30 minutes of work, centred on 22.5 with a 5 minute spread
spec = TruncatedNormalSpec(mu=22.5, sigma=5.0, lower=15.0, upper=30.0)
dist = discretize(spec, 5.0)
for k, p in dist.support:
    print(f"  {k} stages ({5 * k}-{5 * k + 5} min): {p:.3f}")
print("planning value:", expected_stages(dist), "stages")

rng = np.random.default_rng(0)
print("ten draws:", [sample(dist, rng) for _ in range(10)])

###############################################################################
# A 6-hour morning (72 stages) with cheap power until 02:00 and a small
# PV bump in the middle. Renewable energy is given per stage in kWh.
horizon = 72
grid = np.where(np.arange(horizon + 1) < 24, 0.07, 0.15)
pv = np.clip(np.sin(np.linspace(-0.5, 3.6, horizon)), 0, None) * 2.5
profiles = PriceAndRenewableProfiles(grid, 0.04, pv)

flights = tuple(FlightEvent(f"A{n:02d}", "arrival", s, spec) for n, s in enumerate([20, 22, 30, 41, 45, 58]))
scenario = Scenario(fleet=FleetParams(n_ev=4, horizon=horizon), profiles=profiles,
                    schedule=flights, initial_soc=0.6, seed=3)

###############################################################################
# Same seed, same realized workloads for every policy (common random numbers).
for rep in compare(scenario, ["greedy", "renewable", "rollout"]):
    print(rep.summary())
