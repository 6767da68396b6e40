"""Solve the shared-edge allocation problem and check the answer three ways.

Two travelers share one road segment with capacity 10 and a minimum travel
time of 1.  Their valuations are a*ln(1 + theta) with a = 2 and a = 3, so
extra time is worth having and the capacity constraint binds.  Setting both
marginal values equal to a common price nu gives theta = a/nu - 1, and
theta_1 + theta_2 = 10 pins nu = 5/12, theta = (3.8, 6.2).
"""

from travelmech import (ValuationSpec, Traveler, Scenario, build_network, brute_force_oracle,
                        social_welfare, solve_centralized, solve_from_random_starts)

net = build_network(["home", "work"], [("e", "home", "work", 10.0, 1.0)])
travelers = (
    Traveler("1", "home", "work", ["e"], 1.0, ValuationSpec("log_resource", {"a": 2.0})),
    Traveler("2", "home", "work", ["e"], 1.0, ValuationSpec("log_resource", {"a": 3.0})),
)
scenario = Scenario(net, travelers, metadata={"name": "two commuters"})

result = solve_centralized(scenario)
print("allocation      ", {k: round(v, 6) for k, v in result.allocation.theta.items()})
print("capacity price  ", result.certificate.nu, "(closed form 5/12 =", 5 / 12, ")")
print("welfare         ", round(result.welfare, 6))
print("KKT residuals   ", {k: f"{v:.1e}" for k, v in result.certificate.residuals.items()})

# 1. an exhaustive search on a 0.01 lattice should not beat the solver
grid = brute_force_oracle(scenario, 0.01)
print("grid optimum    ", grid.theta, "welfare", round(social_welfare(scenario, grid), 6))

# 2. random starting points all land on the same optimum
_, spread = solve_from_random_starts(scenario)
print(f"spread over 10 random starts: {spread:.1e}")
