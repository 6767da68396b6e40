"""The aligned profile is not an equilibrium under the toll as written.

Reporting the optimal allocation and bidding the capacity price gives each
traveler a payment of -0.5 / +0.5.  The third toll term,
tau_oth * (tau_i - tau_oth) * slack**2, turns into a subsidy whenever a
traveler bids below the others while the edge is not exactly full.  Asking
for the whole edge and bidding 0 exploits it.
"""

import math
from pathlib import Path

from travelmech import (DeviationSearchConfig, best_deviation, construct_candidate_ne,
                        load_scenario, solve_centralized, verify_ne)

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

scenario = load_scenario(SCENARIOS / "worked_resource.json")
result = solve_centralized(scenario)
nu = result.certificate.nu
candidate = construct_candidate_ne(scenario, result)

report = verify_ne(scenario, candidate, nu, DeviationSearchConfig(theta_grid_step=1e-3,
                                                                  tau_grid_step=1e-3))

print("epsilon-NE:", report.is_epsilon_ne, " gains:", {k: round(v, 4) for k, v in report.gains.items()})

dev = best_deviation(scenario, candidate, "1", nu)
print("traveler 1 best reply:", dev.message.demanded_times, dev.message.bid_prices)

# the same number by hand: demand 10 against 6.2 is scaled to 1 + 9 * 8 / 14.2
p = 5 / 12
theta = 1 + 9 * 8 / 14.2
toll = p * (10 - 5) + (0 - p) ** 2 + p * (0 - p) * (10 - 16.2) ** 2
by_hand = (2 * math.log1p(theta) - toll) - (2 * math.log(4.8) + 0.5)
print(f"gain by hand {by_hand:.6f}, by search {dev.gain:.6f}")
