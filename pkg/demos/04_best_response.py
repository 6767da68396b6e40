"""Round-robin best responses from a neutral start, and what they reach.

The dynamics settle quickly, but on a profile where both travelers ask for
the whole edge and one of them bids 0.  That profile passes the deviation
check, keeps every penalty at zero and leaves both travelers better off than
staying home, yet its allocation and prices differ from the central optimum.
The trajectory is written as CSV for plotting.
"""

from pathlib import Path

from travelmech import (best_response_dynamics, load_scenario, solve_centralized, verify_ne,
                        verify_properties)
from travelmech.harness import default_initial_profile, write_trajectory_csv

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

scenario = load_scenario(SCENARIOS / "worked_resource.json")
result = solve_centralized(scenario)
nu = result.certificate.nu

brd = best_response_dynamics(scenario, default_initial_profile(scenario), nu)
print(f"status {brd.status} after {brd.sweeps} updating sweep(s)")
for row in brd.trajectory:
    print(f"  sweep {row['iteration']} traveler {row['traveler']}: demand "
          f"{row['demanded_times']['e']:.3f} bid {row['bid_prices']['e']:.4f} "
          f"utility {row['utility']:.4f}")

print("final profile is an epsilon-NE:", verify_ne(scenario, brd.profile, nu).is_epsilon_ne)
props = verify_properties(scenario, brd.profile, result)
print("utilities           ", {k: round(v, 4) for k, v in props.utilities.items()})
print("penalties           ", props.penalty_at_ne)
print("distance to optimum ", round(props.implementation_distance, 4))
print("max |bid - price|   ", round(props.price_alignment_residual, 4))

write_trajectory_csv(brd.trajectory, "brd_trajectory.csv")
print("trajectory written to brd_trajectory.csv")
