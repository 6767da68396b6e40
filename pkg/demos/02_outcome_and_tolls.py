"""What the mechanism does with arbitrary reports.

Each traveler reports a demanded time and a bid price per edge.  Demands are
floored at the minimum travel time and, if the edge is over capacity, the
excess above the floor is shrunk proportionally.  Tolls are computed from
the reports themselves.
"""

from pathlib import Path

import numpy as np

from travelmech import Message, MessageProfile, load_scenario, outcome, solve_centralized
from travelmech.harness import random_profile
from travelmech.mechanism import feasibility_violation

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

scenario = load_scenario(SCENARIOS / "worked_resource.json")
nu = solve_centralized(scenario).certificate.nu


def show(title, rows):
    prof = MessageProfile({tid: Message(tid, {"e": d}, {"e": b}) for tid, (d, b) in rows.items()})
    out = outcome(scenario, prof, nu)
    print(title)
    print("   allocation", {k[0]: round(v, 4) for k, v in out.allocation.theta.items()})
    print("   payments  ", {k: round(v, 6) for k, v in out.payments.items()},
          " sum", round(sum(out.payments.values()), 9))



show("aligned reports (3.8, 6.2) at price 5/12", {"1": (3.8, 5 / 12), "2": (6.2, 5 / 12)})
show("both ask for 8: scaled back to (5, 5)", {"1": (8.0, 5 / 12), "2": (8.0, 5 / 12)})
show("one asks below the minimum: infinite penalty", {"1": (0.5, 5 / 12), "2": (8.0, 5 / 12)})
show("off-equilibrium bids 0.5 and 0.4", {"1": (4.0, 0.5), "2": (6.0, 0.4)})

# whatever is reported, the allocation stays feasible
rng = np.random.default_rng(0)
worst = max(feasibility_violation(scenario, o.allocation, o.abstainers)
            for o in (outcome(scenario, random_profile(scenario, rng, 5.0), nu)
                      for _ in range(1000)))
print(f"largest constraint violation over 1000 random profiles: {worst:.1e}")
