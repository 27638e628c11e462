"""
A full Bristol-like day
=======================

25 trailers, 174 flights between 06:00 and 22:55, a two-tier tariff and a
PV array. Greedy charging keeps every battery topped up; rollout looks one
stage ahead and scores each choice with the cheaper of the two base rules.
"""

import sys
import time

from asev import bundled_scenario, compare, load_scenario

season = sys.argv[1] if len(sys.argv) > 1 else "summer"
scenario = load_scenario(bundled_scenario(f"bristol_{season}"))
print(scenario.name, "-", len(scenario.schedule), "flights,", scenario.fleet.n_ev, "vehicles")

t0 = time.perf_counter()
greedy, renewable, rollout = compare(scenario, ["greedy", "renewable", "rollout"])
print(f"(simulated in {time.perf_counter() - t0:.1f}s)\n")

for rep in (greedy, renewable, rollout):
    print(rep.summary())

# renewable matching only charges on sunshine and runs out of trailers
if not renewable.feasible:
    f = renewable.failure
    print(f"\nrenewable matching breaks at {f['time']}: {f['reason']}")

saving = 1 - rollout.cost.total / greedy.cost.total
print(f"\nrollout saves {saving:.1%} against greedy charging")
print(f"  energy      {rollout.cost.energy / greedy.cost.energy - 1:+.1%}")
print(f"  degradation {rollout.cost.degradation / greedy.cost.degradation - 1:+.1%}")
print(f"  terminal    £{greedy.cost.terminal:.2f} -> £{rollout.cost.terminal:.2f}")

###############################################################################
# Where does rollout buy its energy? Sum the billed kWh per hour.
hours = [sum(rollout.load_curve[h * 12:(h + 1) * 12]) for h in range(24)]
for h, kwh in enumerate(hours):
    print(f"{h:02d}:00 {'#' * int(kwh / 5):<40} {kwh:6.1f} kWh")
