"""The game the mechanism induces: utilities, equilibrium checks and dynamics.

Unilateral deviations are searched numerically.  A traveler's utility
splits into a sum over route edges (allocation on an edge depends only on
the demands on that edge) minus one route-level penalty, so the search
works edge by edge:

* for each edge, find the best (demand, bid) pair in two classes, demand
  exactly at the lower bound and demand strictly above it;
* combine the per-edge classes, charging the penalty each combination
  triggers;
* also try not travelling at all (all demands 0).

Per-edge searches use a full grid over [lower, capacity/alpha] x
[0, tau_max] followed by a pattern-search refinement.  The best message is
re-scored through :func:`~travelmech.mechanism.outcome`, so the reported
gain always comes from the mechanism itself.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .mechanism import (COMPETITOR_PROXY, Message, MessageProfile, average_price_others,
                        combine_penalty, feasibility_violation, outcome, payment_terms,
                        penalty, penalty_case)

IR_TOL = 1e-9


@dataclass(frozen=True)
class DeviationSearchConfig:
    theta_grid_step: float = 0.01
    tau_grid_step: float = 0.01
    local_refine_tol: float = 1e-9
    epsilon_ne: float = 1e-6
    tau_max: float | None = None  # default: 10 * max nu + 1
    refine: bool = True
    max_sweeps: int = 50
    simultaneous: bool = False
    max_cells: int = 4_000_000  # grid cells evaluated per numpy chunk
    # also try the all-zero "not travelling" message; off by default because
    # the searched demand range is [lower bound, capacity / alpha]
    include_abstention: bool = False

    def __post_init__(self):
        for name in ("theta_grid_step", "tau_grid_step", "local_refine_tol", "epsilon_ne"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.epsilon_ne < self.local_refine_tol:
            raise ValueError("epsilon_ne must be >= local_refine_tol")


@dataclass
class Deviation:
    traveler: str
    message: Message
    gain: float
    utility: float


@dataclass
class NEReport:
    is_epsilon_ne: bool
    worst_deviation: Deviation | None
    gains: dict          # traveler id -> best gain found
    profile: MessageProfile
    epsilon: float

    def to_dict(self):
        w = self.worst_deviation
        return {
            "is_epsilon_ne": self.is_epsilon_ne,
            "epsilon": self.epsilon,
            "gains": dict(self.gains),
            "worst_deviation": None if w is None else {
                "traveler": w.traveler, "gain": w.gain, "utility": w.utility,
                "message": w.message.to_dict()},
        }


@dataclass
class PropertyReport:
    budget_residual: float
    ir_violations: list
    feasibility_ok: bool
    implementation_distance: float
    price_alignment_residual: float
    penalty_at_ne: dict
    degeneracy_flags: list
    utilities: dict = field(default_factory=dict)
    no_participation: dict = field(default_factory=dict)  # tid -> (utility, closed form)

    def to_dict(self):
        return {
            "budget_residual": self.budget_residual,
            "ir_violations": [list(v) for v in self.ir_violations],
            "feasibility_ok": self.feasibility_ok,
            "implementation_distance": self.implementation_distance,
            "price_alignment_residual": self.price_alignment_residual,
            "penalty_at_ne": dict(self.penalty_at_ne),
            "degeneracy_flags": list(self.degeneracy_flags),
            "utilities": dict(self.utilities),
            "no_participation": {k: list(v) for k, v in self.no_participation.items()},
        }


def utility(scenario, out, i):
    """Sum of per-edge satisfaction minus the total payment."""
    t = out.payments[i]
    if t == math.inf:
        return -math.inf
    spec = scenario.traveler(i).valuation
    route = scenario.index_sets.edges_of_traveler[i]
    v = sum(float(spec.value(out.allocation.theta[(i, e)])) for e in route)
    return v - t


def _profile_flags(scenario, profile, label="penalty_at_candidate"):
    flags = []
    idx = scenario.index_sets
    for tid, msg in profile.messages.items():
        if penalty(scenario, idx, tid, msg.demanded_times) == 0:
            continue
        cases = {penalty_case(msg.demanded_times[e], scenario.network.edges[e].min_travel_time,
                              len(idx.travelers_on_edge[e])) for e in idx.edges_of_traveler[tid]}
        kind = next(k for k in ("below", "gamma", "delta") if k in cases)
        flags.append(f"{label}:traveler={tid}:{kind}")
    return flags


def construct_candidate_ne(scenario, solver_result):
    """Profile reporting the optimal allocation and bidding the capacity prices.

    The returned profile carries ``flags`` naming every traveler whose
    penalty at this profile is not zero.
    """
    if not solver_result.converged:
        raise PreconditionError("candidate NE needs a converged solver result")
    nu = solver_result.certificate.nu
    msgs = {}
    for tid, route in scenario.index_sets.edges_of_traveler.items():
        msgs[tid] = Message(tid, {e: solver_result.allocation.theta[(tid, e)] for e in route},
                            {e: nu[e] for e in route})
    profile = MessageProfile(msgs)
    return CandidateProfile(profile.messages, tuple(_profile_flags(scenario, profile)))


@dataclass(frozen=True)
class CandidateProfile(MessageProfile):
    flags: tuple = ()


class _EdgeView:
    """Everything traveler i's payoff on one edge depends on, others held fixed."""

    def __init__(self, scenario, profile, i, e, nu_e):
        idx = scenario.index_sets
        edge = scenario.network.edges[e]
        alpha = {t.id: t.alpha for t in scenario.travelers}
        users = idx.travelers_on_edge[e]
        others = [j for j in users if j != i]
        self.n = len(users)
        self.lo, self.cap = edge.min_travel_time, edge.capacity
        self.alpha = alpha[i]
        self.spec = scenario.traveler(i).valuation
        self.hi = self.cap / self.alpha
        self.raw_others = sum(alpha[j] * profile[j].demanded_times[e] for j in others)
        active = [j for j in others if not profile[j].abstains]
        floored = [max(profile[j].demanded_times[e], self.lo) for j in active]
        self.act_alpha = sum(alpha[j] for j in active)
        self.act_load = sum(alpha[j] * d for j, d in zip(active, floored))
        self.act_excess = sum(alpha[j] * (d - self.lo) for j, d in zip(active, floored))
        self.tau_oth = (sum(profile[j].bid_prices[e] for j in others) / len(others)
                        if others else 0.0)
        if scenario.mechanism.nu_source == COMPETITOR_PROXY:
            self.nu = self.tau_oth
        else:
            if nu_e is None:
                raise PreconditionError(f"no nu for edge {e}")
            self.nu = float(nu_e)

    def allocation(self, d):
        d = np.maximum(d, self.lo)
        load = self.alpha * d + self.act_load
        base = self.lo * (self.alpha + self.act_alpha)
        excess = self.alpha * (d - self.lo) + self.act_excess
        with np.errstate(divide="ignore", invalid="ignore"):
            scaled = self.lo + (d - self.lo) * (self.cap - base) / excess
        return np.where(load <= self.cap, d, scaled)

    def payoff(self, d, tau, abstain=False):
        d = np.asarray(d, dtype=float)
        tau = np.asarray(tau, dtype=float)
        v = 0.0 if abstain else self.spec._value(self.allocation(d))
        if self.n < 2:
            return v + 0.0 * tau
        slack = self.cap - self.alpha * d - self.raw_others
        return v - payment_terms(self.tau_oth, self.alpha, d, self.cap / self.n, tau, self.nu, slack)


def _grid(lo, hi, step):
    if hi <= lo:
        return np.array([lo])
    k = int(math.floor((hi - lo) / step + 1e-9))
    pts = lo + step * np.arange(k + 1)
    if hi - pts[-1] > 1e-12 * max(1.0, hi):
        pts = np.append(pts, hi)
    return pts


def _best_on_grid(view, d_grid, tau_grid, max_cells, abstain=False):
    best = (-math.inf, None, None)
    rows = max(1, max_cells // max(1, tau_grid.size))
    for s in range(0, d_grid.size, rows):
        d = d_grid[s:s + rows, None]
        vals = view.payoff(d, tau_grid[None, :], abstain=abstain)
        k = int(np.argmax(vals))
        r, c = divmod(k, tau_grid.size)
        if vals[r, c] > best[0]:
            best = (float(vals[r, c]), float(d[r, 0]), float(tau_grid[c]))
    return best


def _pattern_search(fun, x0, steps, lower, upper, tol, max_iter=20_000):
    """Maximise fun by compass search inside the box [lower, upper]."""
    x = np.array(x0, dtype=float)
    steps = np.array(steps, dtype=float)
    fx = fun(x)
    it = 0
    while np.any(steps >= tol) and it < max_iter:
        it += 1
        improved = False
        for k in range(x.size):
            if steps[k] < tol:
                continue
            for sign in (1.0, -1.0):
                y = x.copy()
                y[k] = min(max(y[k] + sign * steps[k], lower[k]), upper[k])
                if y[k] == x[k]:
                    continue
                fy = fun(y)
                if fy > fx:
                    x, fx, improved = y, fy, True
                    break
        if not improved:
            steps *= 0.5
    return fx, x


def _edge_class_bests(view, current_tau, cfg, tau_max):
    """Best (value, demand, bid) on one edge for demand at / above the lower bound."""
    tau_grid = _grid(0.0, tau_max, cfg.tau_grid_step)
    out = {}
    if view.n < 2:
        # toll is zero; bid is irrelevant, keep the current one
        d_grid = _grid(view.lo, view.hi, cfg.theta_grid_step)
        v_at = float(view.payoff(view.lo, current_tau))
        out["at"] = (v_at, view.lo, current_tau)
        above = d_grid[d_grid > view.lo]
        if above.size:
            vals = view.payoff(above, current_tau)
            k = int(np.argmax(vals))
            out["above"] = (float(vals[k]), float(above[k]), current_tau)
        return out

    val, _, tau = _best_on_grid(view, np.array([view.lo]), tau_grid, cfg.max_cells)
    if cfg.refine:
        val, x = _pattern_search(lambda z: float(view.payoff(view.lo, z[0])), [tau],
                                 [cfg.tau_grid_step], [0.0], [tau_max], cfg.local_refine_tol)
        tau = float(x[0])
    out["at"] = (val, view.lo, tau)

    d_grid = _grid(view.lo, view.hi, cfg.theta_grid_step)
    d_grid = d_grid[d_grid > view.lo]
    if d_grid.size:
        val, d, tau = _best_on_grid(view, d_grid, tau_grid, cfg.max_cells)
        if cfg.refine:
            floor = view.lo + max(cfg.local_refine_tol, 1e-12 * max(1.0, view.lo))
            val, x = _pattern_search(lambda z: float(view.payoff(z[0], z[1])), [d, tau],
                                     [cfg.theta_grid_step, cfg.tau_grid_step],
                                     [floor, 0.0], [max(view.hi, floor), tau_max],
                                     cfg.local_refine_tol)
            d, tau = float(x[0]), float(x[1])
        out["above"] = (val, d, tau)
    return out


def _abstain_best(view, cfg, tau_max):
    tau_grid = _grid(0.0, tau_max, cfg.tau_grid_step)
    val, _, tau = _best_on_grid(view, np.array([0.0]), tau_grid, cfg.max_cells, abstain=True)
    if cfg.refine and view.n >= 2:
        val, x = _pattern_search(lambda z: float(view.payoff(0.0, z[0], abstain=True)), [tau],
                                 [cfg.tau_grid_step], [0.0], [tau_max], cfg.local_refine_tol)
        tau = float(x[0])
    return val, tau


def default_tau_max(profile, nu):
    if nu:
        top = max(nu.values())
    else:
        top = max((max(m.bid_prices.values(), default=0.0) for m in profile.messages.values()),
                  default=0.0)
    return 10.0 * top + 1.0


def best_deviation(scenario, profile, i, nu, config=None):
    """Traveler i's best unilateral message found by the search (a Deviation)."""
    cfg = config or DeviationSearchConfig()
    tau_max = cfg.tau_max if cfg.tau_max is not None else default_tau_max(profile, nu)
    route = scenario.index_sets.edges_of_traveler[i]
    current = profile[i]
    u_now = utility(scenario, outcome(scenario, profile, nu), i)

    views = {e: _EdgeView(scenario, profile, i, e, None if nu is None else nu.get(e))
             for e in route}
    bests = {e: _edge_class_bests(views[e], current.bid_prices[e], cfg, tau_max) for e in route}

    candidates = []
    for classes in itertools.product(*[sorted(bests[e]) for e in route]):
        cases = []
        for e, cls in zip(route, classes):
            n = views[e].n
            if cls == "at":
                cases.append("delta" if n >= 2 else "none")
            else:
                cases.append("gamma" if n == 1 else "none")
        phi = combine_penalty(cases, scenario.mechanism)
        total = sum(bests[e][cls][0] for e, cls in zip(route, classes)) - phi
        msg = Message(i, {e: bests[e][cls][1] for e, cls in zip(route, classes)},
                      {e: bests[e][cls][2] for e, cls in zip(route, classes)})
        candidates.append((total, msg))

    if cfg.include_abstention:
        abst = {e: _abstain_best(views[e], cfg, tau_max) for e in route}
        candidates.append((sum(v for v, _ in abst.values()),
                           Message(i, {e: 0.0 for e in route}, {e: abst[e][1] for e in route})))

    best_msg = max(candidates, key=lambda c: c[0])[1]
    # re-score through the mechanism
    u_best = utility(scenario, outcome(scenario, profile.replace(best_msg), nu), i)
    if u_best <= u_now:
        return Deviation(i, current, 0.0 if u_now > -math.inf else math.inf, u_now)
    gain = math.inf if u_now == -math.inf else u_best - u_now
    return Deviation(i, best_msg, gain, u_best)


def verify_ne(scenario, profile, nu, config=None):
    cfg = config or DeviationSearchConfig()
    gains, worst = {}, None
    for tid in scenario.index_sets.edges_of_traveler:
        dev = best_deviation(scenario, profile, tid, nu, cfg)
        gains[tid] = dev.gain
        if worst is None or dev.gain > worst.gain:
            worst = dev
    ok = worst is None or worst.gain <= cfg.epsilon_ne
    return NEReport(ok, worst, gains, profile, cfg.epsilon_ne)


@dataclass
class BRDResult:
    status: str  # converged | cycled | capped
    sweeps: int
    profile: MessageProfile
    trajectory: list  # dict rows
    max_infeasibility: float
    nu_mode: str


def _message_distance(a, b):
    diffs = [abs(a.demanded_times[e] - b.demanded_times[e]) for e in a.demanded_times]
    diffs += [abs(a.bid_prices[e] - b.bid_prices[e]) for e in a.bid_prices]
    return max(diffs, default=0.0)


def _profile_key(profile, digits=9):
    return tuple((tid, tuple(round(v, digits) for v in m.demanded_times.values()),
                  tuple(round(v, digits) for v in m.bid_prices.values()))
                 for tid, m in profile.messages.items())


def best_response_dynamics(scenario, initial_profile, nu, config=None):
    """Round-robin best responses until nobody moves, a cycle, or the sweep cap.

    Each traveler switches only when the search finds a gain above
    ``epsilon_ne``.  With ``simultaneous=True`` all travelers respond to the
    profile of the previous sweep.  Under the competitor_proxy price source
    the price is re-derived from the current bids at every evaluation.

    ``sweeps`` in the result counts the sweeps that changed the profile; the
    final sweep that merely confirms a fixed point is not counted.
    """
    cfg = config or DeviationSearchConfig()
    nu_mode = ("competitor_proxy (recomputed each sweep)"
               if scenario.mechanism.nu_source == COMPETITOR_PROXY else "external_certificate (fixed)")
    profile = MessageProfile(dict(initial_profile.messages))
    order = list(scenario.index_sets.edges_of_traveler)
    trajectory = []
    worst_violation = 0.0
    seen = {_profile_key(profile): 0}

    def record(sweep, prof):
        nonlocal worst_violation
        out = outcome(scenario, prof, nu)
        worst_violation = max(worst_violation,
                              feasibility_violation(scenario, out.allocation, out.abstainers))
        for tid in order:
            m = prof[tid]
            trajectory.append({"iteration": sweep, "traveler": tid,
                               "demanded_times": dict(m.demanded_times),
                               "bid_prices": dict(m.bid_prices),
                               "utility": utility(scenario, out, tid)})

    record(0, profile)
    status = "capped"
    sweep = 0
    for sweep in range(1, cfg.max_sweeps + 1):
        start = profile
        for tid in order:
            basis = start if cfg.simultaneous else profile
            dev = best_deviation(scenario, basis, tid, nu, cfg)
            if dev.gain > cfg.epsilon_ne:
                profile = profile.replace(dev.message)
        record(sweep, profile)
        change = max((_message_distance(start[t], profile[t]) for t in order), default=0.0)
        if change <= cfg.local_refine_tol:
            status = "converged"
            sweep -= 1
            break
        key = _profile_key(profile)
        if key in seen:
            status = "cycled"
            break
        seen[key] = sweep
    return BRDResult(status, sweep, profile, trajectory, worst_violation, nu_mode)


def no_participation_utility(scenario, profile, i, nu):
    """Utility of traveler i after switching to 'not travelling' with bids equal to nu."""
    route = scenario.index_sets.edges_of_traveler[i]
    if scenario.mechanism.nu_source == COMPETITOR_PROXY:
        bids = {e: average_price_others(profile, scenario.index_sets, e, i) for e in route}
    else:
        bids = {e: nu[e] for e in route}
    msg = Message(i, {e: 0.0 for e in route}, bids)
    return utility(scenario, outcome(scenario, profile.replace(msg), nu), i)


def no_participation_closed_form(scenario, i, nu):
    """sum over shared route edges of nu_e * c_e / |S_e|."""
    idx = scenario.index_sets
    total = 0.0
    for e in idx.edges_of_traveler[i]:
        n = len(idx.travelers_on_edge[e])
        if n >= 2:
            total += nu[e] * scenario.network.edges[e].capacity / n
    return total


def verify_properties(scenario, profile, solver_result):
    """Evaluate budget balance, IR, feasibility, implementation, prices, penalties."""
    if not solver_result.converged:
        raise PreconditionError("property check needs a converged solver result")
    nu = solver_result.certificate.nu
    out = outcome(scenario, profile, nu)
    order = list(scenario.index_sets.edges_of_traveler)
    utilities = {tid: utility(scenario, out, tid) for tid in order}
    total = sum(out.payments.values())
    budget = abs(total) if math.isfinite(total) else math.inf
    ir = [(tid, u) for tid, u in utilities.items() if not u >= -IR_TOL]
    feas = feasibility_violation(scenario, out.allocation, out.abstainers) <= 1e-9
    dist = out.allocation.distance(solver_result.allocation)
    align = max((abs(profile[tid].bid_prices[e] - nu[e])
                 for tid, route in scenario.index_sets.edges_of_traveler.items() for e in route),
                default=0.0)
    flags = _profile_flags(scenario, profile, "penalty_at_profile")
    if order and all(nu[e] == 0.0 for e in scenario.network.edges):
        flags.append("all_capacity_prices_zero")
    nopart = {tid: (no_participation_utility(scenario, profile, tid, nu),
                    no_participation_closed_form(scenario, tid, nu)) for tid in order}
    return PropertyReport(budget, ir, feas, dist, align, dict(out.penalties), flags,
                          utilities, nopart)
