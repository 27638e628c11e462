"""Energy management for a fleet of airport service electric vehicles.

Simulates the fleet stage by stage (5-minute stages over one day) and
controls work assignment and charging with two base heuristics and a
rollout controller built on them.
"""

from .costs import (CostBreakdown, DegradationParams, PriceAndRenewableProfiles, accumulate,
                    degradation_cost, expand_tiers, stage_cost, stage_energy_cost, terminal_cost)
from .dynamics import (AsevState, BatteryDepleted, ControlDecision, DelayThresholdViolated, FleetParams,
                       FleetState, InfeasibleTransition, PendingFlight, eligible_asevs, feasible_controls, step)
from .policies import (PolicyOutcome, RolloutConfig, heuristic_greedy_charging, heuristic_renewable_matching,
                       rollout_decide, run_policy, select_base_heuristic)
from .scenario import bundled_scenario, load_scenario, validate_scenario
from .sim import Scenario, ScheduleEvent, SimReport, compare, exact_dp_oracle, run
from .workload import (DiscreteWorkloadDist, FlightEvent, TruncatedNormalSpec, discretize, expected_stages,
                       load_schedule, sample, truncated_pdf_cdf)

__version__ = "0.1.0"
