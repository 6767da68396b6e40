"""Decreasing valuations push the optimum into the penalised corner.

With v(theta) = -theta**2 every traveler wants the shortest possible time,
so the optimum sits at the minimum travel time and the capacity price is 0.
The penalty schedule fines anyone who reports exactly the minimum on a
shared edge, so the natural equilibrium candidate carries that fine.  The
harness reports this as a flag (exit code 3) rather than a failure.
"""

from pathlib import Path

from travelmech import construct_candidate_ne, load_scenario, run_suite, solve_centralized

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

scenario = load_scenario(SCENARIOS / "paper_literal_shared.json")
result = solve_centralized(scenario)
print("optimum", result.allocation.theta, "price", result.certificate.nu,
      "lower-bound multipliers", result.certificate.lam)
print("candidate flags", construct_candidate_ne(scenario, result).flags)

report = run_suite(scenario, "verify")
print(report.to_table())
