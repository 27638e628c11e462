"""
A flight cancelled an hour ahead
================================

Mid-morning, an arriving flight is cancelled with one hour's notice. The
controllers re-plan from the moment the news arrives; the trailer that
would have served it is free for charging or the next flight.
"""

from asev import bundled_scenario, compare, load_scenario

plain = load_scenario(bundled_scenario("bristol_summer"))
cancel = load_scenario(bundled_scenario("bristol_cancel"))
(event,) = cancel.events
flight = next(f for f in cancel.schedule if f.flight_id == event.flight_id)
print(f"{event.flight_id} ({flight.kind}, stage {flight.scheduled_stage}) cancelled at stage {event.announce_stage}")

before = {r.policy: r for r in compare(plain, ["greedy", "rollout"])}
after = {r.policy: r for r in compare(cancel, ["greedy", "rollout"])}
for policy in ("greedy", "rollout"):
    b, a = before[policy].cost.total, after[policy].cost.total
    print(f"{policy:8s} £{b:7.2f} -> £{a:7.2f}  ({a - b:+.2f})")

saving = 1 - after["rollout"].cost.total / after["greedy"].cost.total
print(f"rollout vs greedy with the cancellation: {saving:.1%} cheaper")
served = {row["flight_id"] for row in after["rollout"].service_log}
print("cancelled flight in service log:", event.flight_id in served)
