"""The indirect mechanism: messages, outcome projection, tolls and penalties.

A message from traveler i holds, for every edge e on i's route, a demanded
travel time ``demanded_times[e]`` and a bid price ``bid_prices[e]``.  The
edge toll is::

    t_i^e = tau_oth * (alpha_i * d_i - c_e / |S_e|)
            + (tau_i - nu_e) ** 2
            + tau_oth * (tau_i - tau_oth) * (c_e - sum_j alpha_j * d_j) ** 2

where ``tau_oth`` is the mean bid of the other travelers on e.  Tolls are
evaluated on the reported demands; only the allocation is projected.  On
edges used by a single traveler the toll is 0.

A message whose demanded times are all exactly 0 means "not travelling": the
traveler gets zero time on every route edge, loads no edge and pays no
penalty (tolls are still evaluated on the zero demand).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InfeasibleError, InvalidAttributeError, PreconditionError, StructuralError
from .solver import Allocation

EXTERNAL_CERTIFICATE = "external_certificate"
COMPETITOR_PROXY = "competitor_proxy"
NU_SOURCES = (EXTERNAL_CERTIFICATE, COMPETITOR_PROXY)

# demanded times closer than this to the lower bound count as "at the bound"
BOUND_TOL = 1e-12


@dataclass(frozen=True)
class MechanismParams:
    gamma: float = 1e6
    delta: float = 1e6
    nu_source: str = EXTERNAL_CERTIFICATE

    def __post_init__(self):
        if not (self.gamma > 0 and self.delta > 0):
            raise InvalidAttributeError("gamma and delta must be > 0")
        if self.nu_source not in NU_SOURCES:
            raise InvalidAttributeError(f"nu_source must be one of {NU_SOURCES}")
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "delta", float(self.delta))

    def to_dict(self):
        return {"gamma": self.gamma, "delta": self.delta, "nu_source": self.nu_source}

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        unknown = set(data) - {"gamma", "delta", "nu_source"}
        if unknown:
            raise InvalidAttributeError(f"unknown mechanism keys {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class Message:
    traveler_id: str
    demanded_times: dict
    bid_prices: dict

    def __post_init__(self):
        object.__setattr__(self, "traveler_id", str(self.traveler_id))
        for name in ("demanded_times", "bid_prices"):
            raw = getattr(self, name)
            clean = {str(k): float(v) for k, v in raw.items()}
            for k, v in clean.items():
                if not math.isfinite(v) or v < 0:
                    raise DomainError(
                        f"traveler {self.traveler_id}: {name}[{k}] must be finite and >= 0")
            object.__setattr__(self, name, clean)
        if set(self.demanded_times) != set(self.bid_prices):
            raise StructuralError(
                f"traveler {self.traveler_id}: demanded_times and bid_prices keys differ")

    @property
    def abstains(self):
        return all(v == 0.0 for v in self.demanded_times.values())

    def to_dict(self):
        return {"traveler_id": self.traveler_id, "demanded_times": dict(self.demanded_times),
                "bid_prices": dict(self.bid_prices)}


@dataclass(frozen=True)
class MessageProfile:
    messages: dict  # traveler id -> Message

    def __getitem__(self, tid):
        return self.messages[tid]

    def replace(self, message):
        new = dict(self.messages)
        new[message.traveler_id] = message
        return MessageProfile(new)

    def to_dict(self):
        return {"messages": [m.to_dict() for m in self.messages.values()]}

    @classmethod
    def from_dict(cls, data):
        msgs = [Message(**m) for m in data["messages"]]
        return cls({m.traveler_id: m for m in msgs})


def check_profile(scenario, profile):
    """Exactly one message per traveler, keyed by that traveler's route edges."""
    idx = scenario.index_sets
    if set(profile.messages) != set(idx.edges_of_traveler):
        raise StructuralError("profile must contain exactly one message per traveler")
    for tid, route in idx.edges_of_traveler.items():
        if set(profile[tid].demanded_times) != set(route):
            raise StructuralError(f"traveler {tid}: message keys differ from route edges")


@dataclass
class Outcome:
    allocation: Allocation
    payments: dict        # traveler id -> t_i
    edge_payments: dict   # (traveler id, edge id) -> t_i^e
    penalties: dict       # traveler id -> phi_i
    abstainers: frozenset = field(default_factory=frozenset)

    def to_dict(self):
        ep = {}
        for (tid, eid), val in self.edge_payments.items():
            ep.setdefault(tid, {})[eid] = val
        return {"allocation": self.allocation.to_dict(), "payments": dict(self.payments),
                "edge_payments": ep, "penalties": dict(self.penalties),
                "abstainers": sorted(self.abstainers)}


def average_price_others(profile, index_sets, e, i):
    users = index_sets.travelers_on_edge[e]
    if i not in users:
        raise DomainError(f"traveler {i} does not use edge {e}")
    if len(users) == 1:
        return 0.0
    return sum(profile[j].bid_prices[e] for j in users if j != i) / (len(users) - 1)


def payment_terms(tau_others, alpha_i, demand_i, fair_share, tau_i, nu, slack):
    """The three toll terms summed; broadcasts over numpy arrays."""
    return (tau_others * (alpha_i * demand_i - fair_share)
            + (tau_i - nu) ** 2
            + tau_others * (tau_i - tau_others) * slack ** 2)


def _resolve_nu(params, nu_e, tau_others):
    if params.nu_source == COMPETITOR_PROXY:
        return tau_others
    if nu_e is None:
        raise PreconditionError("nu_source=external_certificate needs a nu value per edge")
    return float(nu_e)


def edge_payment(scenario, profile, i, e, nu_e=None):
    idx = scenario.index_sets
    users = idx.travelers_on_edge[e]
    if i not in users:
        raise DomainError(f"traveler {i} does not use edge {e}")
    if len(users) == 1:
        return 0.0
    edge = scenario.network.edges[e]
    alpha = {t.id: t.alpha for t in scenario.travelers}
    tau_oth = average_price_others(profile, idx, e, i)
    nu = _resolve_nu(scenario.mechanism, nu_e, tau_oth)
    slack = edge.capacity - sum(alpha[j] * profile[j].demanded_times[e] for j in users)
    return float(payment_terms(tau_oth, alpha[i], profile[i].demanded_times[e],
                               edge.capacity / len(users), profile[i].bid_prices[e], nu, slack))


def penalty_case(demand, lower, competitors):
    """'below', 'gamma', 'delta' or 'none' for a single edge."""
    if demand < lower - BOUND_TOL * max(1.0, lower):
        return "below"
    at_bound = abs(demand - lower) <= BOUND_TOL * max(1.0, lower)
    if at_bound:
        return "delta" if competitors >= 2 else "none"
    return "gamma" if competitors == 1 else "none"


def combine_penalty(cases, params):
    """Existential schedule; precedence below-minimum > gamma > delta, no stacking."""
    if "below" in cases:
        return math.inf
    if "gamma" in cases:
        return params.gamma
    if "delta" in cases:
        return params.delta
    return 0.0


def penalty(scenario, index_sets, i, demanded_times):
    if all(v == 0.0 for v in demanded_times.values()):
        return 0.0
    cases = [penalty_case(demanded_times[e], scenario.network.edges[e].min_travel_time,
                          len(index_sets.travelers_on_edge[e]))
             for e in index_sets.edges_of_traveler[i]]
    return combine_penalty(cases, scenario.mechanism)


def project_to_feasible(scenario, demands):
    """Map reported demands {traveler: {edge: d}} to a feasible allocation.

    Demands are floored at the edge's lower bound.  Where an edge is then
    over capacity, every traveler's excess above the bound is shrunk by one
    common factor so the capacity constraint is met with equality.
    Travelers whose demands are all 0 are treated as not travelling.
    """
    idx = scenario.index_sets
    alpha = {t.id: t.alpha for t in scenario.travelers}
    abstain = {tid for tid, d in demands.items() if all(v == 0.0 for v in d.values())}
    theta = {}
    for eid, users in idx.travelers_on_edge.items():
        active = [j for j in users if j not in abstain]
        for j in users:
            if j in abstain:
                theta[(j, eid)] = 0.0
        if not active:
            continue
        edge = scenario.network.edges[eid]
        lo, cap = edge.min_travel_time, edge.capacity
        a = np.array([alpha[j] for j in active])
        d = np.maximum(np.array([demands[j][eid] for j in active], dtype=float), lo)
        base = lo * a.sum()
        if base > cap * (1 + 1e-12):
            raise InfeasibleError(f"edge {eid}: infeasible even at the lower bounds")
        load = a @ d
        if load > cap:
            excess = a @ (d - lo)
            d = lo + (d - lo) * ((cap - base) / excess)
        for j, val in zip(active, d):
            theta[(j, eid)] = float(val)
    ordered = {(tid, eid): theta[(tid, eid)]
               for tid, route in idx.edges_of_traveler.items() for eid in route}
    return Allocation(ordered)


def feasibility_violation(scenario, allocation, abstainers=frozenset()):
    """Largest violation of the lower-bound and capacity constraints (0 if feasible).

    Non-travelling participants are exempt from the lower bound.
    """
    idx = scenario.index_sets
    alpha = {t.id: t.alpha for t in scenario.travelers}
    worst = 0.0
    for eid, users in idx.travelers_on_edge.items():
        edge = scenario.network.edges[eid]
        load = 0.0
        for j in users:
            val = allocation.theta[(j, eid)]
            if j not in abstainers:
                worst = max(worst, edge.min_travel_time - val)
            load += alpha[j] * val
        worst = max(worst, load - edge.capacity)
    return worst


def outcome(scenario, profile, nu=None):
    """Apply the outcome function to a complete message profile.

    ``nu`` maps edge id to the capacity price; it is required when the
    scenario's nu_source is external_certificate and ignored otherwise.
    """
    check_profile(scenario, profile)
    idx = scenario.index_sets
    demands = {tid: m.demanded_times for tid, m in profile.messages.items()}
    allocation = project_to_feasible(scenario, demands)
    edge_payments, payments, penalties = {}, {}, {}
    for tid, route in idx.edges_of_traveler.items():
        total = 0.0
        for eid in route:
            nu_e = None if nu is None else nu.get(eid)
            t = edge_payment(scenario, profile, tid, eid, nu_e)
            edge_payments[(tid, eid)] = t
            total += t
        penalties[tid] = penalty(scenario, idx, tid, profile[tid].demanded_times)
        payments[tid] = total + penalties[tid]
    abstainers = frozenset(tid for tid, m in profile.messages.items() if m.abstains)
    return Outcome(allocation, payments, edge_payments, penalties, abstainers)
