"""Suite orchestration and report emission.

Every suite returns a :class:`SuiteReport` whose checks each end up as
``pass``, ``fail``, ``flag`` (a documented degeneracy, not an error) or
``info``.  Exit codes: 0 all pass, 2 any failure, 3 flags only, 4 input
error (raised before a report exists, see the CLI).
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError, NonConvergenceError, OracleScopeError, UsageError
from .game import (DeviationSearchConfig, best_response_dynamics, construct_candidate_ne,
                   verify_ne, verify_properties)
from .mechanism import Message, MessageProfile, feasibility_violation, outcome
from .network import validate_scenario
from .solver import brute_force_oracle, social_welfare, solve_centralized, solve_from_random_starts
from .valuation import RESOURCE_MODE, max_abs_derivative

SUITES = ("solve", "mechanism-eval", "find-ne", "verify", "full")

EXIT_OK, EXIT_FAIL, EXIT_FLAGGED, EXIT_INPUT = 0, 2, 3, 4

FEAS_TOL = 1e-9
BUDGET_TOL = 1e-8
NOPART_TOL = 1e-8
PRICE_TOL = 1e-4
IMPL_TOL = 1e-4
RANDOM_PROFILES = 1000


@dataclass
class Check:
    name: str
    status: str  # pass | fail | flag | info
    detail: str = ""

    def to_dict(self):
        return {"name": self.name, "status": self.status, "detail": self.detail}


@dataclass
class SuiteReport:
    scenario: str
    suite: str
    checks: list = field(default_factory=list)
    sections: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    trajectory: list = field(default_factory=list)

    def add(self, name, status, detail=""):
        self.checks.append(Check(name, status, detail))

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def exit_code(self):
        statuses = {c.status for c in self.checks}
        if "fail" in statuses:
            return EXIT_FAIL
        if "flag" in statuses:
            return EXIT_FLAGGED
        return EXIT_OK

    def to_dict(self, with_timing=True):
        out = {"scenario": self.scenario, "suite": self.suite, "exit_code": self.exit_code,
               "checks": [c.to_dict() for c in self.checks], "sections": self.sections}
        if with_timing:
            out["timing"] = dict(self.timing)
        return _jsonable(out)

    def to_json(self, with_timing=True):
        return json.dumps(self.to_dict(with_timing), indent=2, sort_keys=True) + "\n"

    def to_table(self):
        rows = [(c.name, c.status.upper(), c.detail) for c in self.checks]
        w0 = max([len(r[0]) for r in rows] + [5])
        w1 = max([len(r[1]) for r in rows] + [6])
        lines = [f"scenario: {self.scenario}   suite: {self.suite}   exit: {self.exit_code}",
                 f"{'check':<{w0}}  {'status':<{w1}}  detail",
                 f"{'-' * w0}  {'-' * w1}  {'-' * 6}"]
        lines += [f"{a:<{w0}}  {b:<{w1}}  {c}" for a, b, c in rows]
        if self.timing:
            lines.append("timing: " + ", ".join(f"{k}={v:.3f}s" for k, v in self.timing.items()))
        return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_trajectory_csv(rows, path):
    """Long-format CSV: one line per (iteration, traveler, edge)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "traveler", "edge", "demanded_time", "bid_price", "utility"])
        for row in rows:
            for e, d in row["demanded_times"].items():
                w.writerow([row["iteration"], row["traveler"], e, repr(d),
                            repr(row["bid_prices"][e]), repr(row["utility"])])


def _ok(flag):
    return "pass" if flag else "fail"


def lipschitz_bound(scenario):
    """Largest sampled |v'| over each variable's feasible interval."""
    top = 0.0
    for t in scenario.travelers:
        for e in t.route.edge_sequence:
            edge = scenario.network.edges[e]
            top = max(top, max_abs_derivative(t.valuation, edge.min_travel_time,
                                              max(edge.capacity / t.alpha, edge.min_travel_time)))
    return top


def _run_solve(scenario, report, with_oracle=True):
    validation = validate_scenario(scenario)
    report.sections["validation"] = validation.to_dict()
    report.add("scenario_feasible", _ok(validation.feasible),
               "" if validation.feasible else "lower-bound load exceeds capacity on "
               + ", ".join(e for e, ok in validation.edge_feasible.items() if not ok))
    if not validation.feasible:
        return None
    report.add("valuation_assumptions", _ok(not validation.valuation_violations),
               json.dumps(validation.valuation_violations) if validation.valuation_violations else "")
    if validation.alpha_violations:
        report.add("alpha_bounds", "fail", ", ".join(validation.alpha_violations))
    if not validation.penalty_scale_ok:
        report.add("penalty_scale", "flag", "gamma/delta below 1e3 x max |v| on the box")

    cfg = scenario.solver
    try:
        result = solve_centralized(scenario, cfg)
    except NonConvergenceError as exc:
        report.add("solver_converged", "fail", str(exc))
        return None
    except InfeasibleError as exc:
        report.add("solver_converged", "fail", str(exc))
        return None
    report.sections["solver"] = result.summary()
    res = result.certificate.residuals
    worst = max(res.values(), default=0.0)
    report.add("solver_converged", "pass", f"{result.iterations} iterations")
    report.add("kkt_certificate", _ok(worst <= cfg.kkt_tol), f"max residual {worst:.3e}")
    report.add("solution_feasible", _ok(res.get("primal_feasibility", 0.0) <= FEAS_TOL),
               f"primal residual {res.get('primal_feasibility', 0.0):.3e}")

    try:
        starts, spread = solve_from_random_starts(scenario, cfg)
        report.add("uniqueness", _ok(spread <= cfg.solution_tol),
                   f"{len(starts)} starts, spread {spread:.3e}")
    except NonConvergenceError as exc:
        report.add("uniqueness", "fail", f"a random start failed: {exc}")

    if with_oracle:
        try:
            grid = brute_force_oracle(scenario, cfg.grid_step)
        except OracleScopeError as exc:
            report.add("oracle_dominance", "info", f"skipped: {exc}")
        else:
            dim = len(grid.theta)
            w_grid = social_welfare(scenario, grid)
            slack = lipschitz_bound(scenario) * cfg.grid_step * dim
            dist = result.allocation.distance(grid)
            report.sections["oracle"] = {"allocation": grid.to_dict(), "welfare": w_grid,
                                         "lipschitz_slack": slack, "distance": dist}
            report.add("oracle_dominance", _ok(result.welfare >= w_grid - slack),
                       f"solver {result.welfare:.6f} vs grid {w_grid:.6f} (slack {slack:.2e})")
            report.add("oracle_distance", _ok(dist <= 2 * cfg.grid_step),
                       f"max coordinate gap {dist:.4f}")
    return result


def random_profile(scenario, rng, bid_scale=1.0):
    msgs = {}
    for tid, route in scenario.index_sets.edges_of_traveler.items():
        alpha = scenario.traveler(tid).alpha
        d = {e: float(rng.uniform(0.0, 2.0 * scenario.network.edges[e].capacity / alpha))
             for e in route}
        b = {e: float(rng.uniform(0.0, bid_scale)) for e in route}
        msgs[tid] = Message(tid, d, b)
    return MessageProfile(msgs)


def _run_mechanism_eval(scenario, report, profile, nu, n_random=0, seed=0):
    out = outcome(scenario, profile, nu)
    report.sections["outcome"] = out.to_dict()
    viol = feasibility_violation(scenario, out.allocation, out.abstainers)
    report.add("allocation_feasible", _ok(viol <= FEAS_TOL), f"max violation {viol:.3e}")
    ident = 0.0
    for tid, route in scenario.index_sets.edges_of_traveler.items():
        parts = sum(out.edge_payments[(tid, e)] for e in route) + out.penalties[tid]
        if math.isfinite(parts):
            ident = max(ident, abs(out.payments[tid] - parts))
    report.add("payment_identity", _ok(ident <= 1e-12), f"max gap {ident:.3e}")
    if n_random:
        rng = np.random.default_rng(seed)
        worst, errors = 0.0, 0
        scale = 10.0 * max(nu.values(), default=0.0) + 1.0 if nu else 1.0
        for _ in range(n_random):
            try:
                o = outcome(scenario, random_profile(scenario, rng, scale), nu)
                worst = max(worst, feasibility_violation(scenario, o.allocation, o.abstainers))
            except Exception:  # noqa: BLE001 - counted, reported below
                errors += 1
        report.add("feasibility_random_profiles", _ok(worst <= FEAS_TOL and errors == 0),
                   f"{n_random} profiles, max violation {worst:.3e}, exceptions {errors}")


def default_initial_profile(scenario):
    """Demand lower bound + 0.5 everywhere, bid 0."""
    msgs = {}
    for tid, route in scenario.index_sets.edges_of_traveler.items():
        msgs[tid] = Message(tid, {e: scenario.network.edges[e].min_travel_time + 0.5 for e in route},
                            {e: 0.0 for e in route})
    return MessageProfile(msgs)


def _perturbed(profile, amount):
    tid = next(iter(profile.messages))
    m = profile[tid]
    e = next(iter(m.bid_prices))
    bids = dict(m.bid_prices)
    bids[e] += amount
    return MessageProfile(dict(profile.messages)).replace(Message(tid, m.demanded_times, bids))


def _run_find_ne(scenario, report, result, search):
    resource = scenario.orientation == RESOURCE_MODE
    nu = result.certificate.nu
    cand = construct_candidate_ne(scenario, result)
    report.sections["candidate"] = {"profile": cand.to_dict(), "flags": list(cand.flags)}
    if cand.flags:
        report.add("candidate_penalty_free", "flag", "; ".join(cand.flags))
    else:
        report.add("candidate_penalty_free", "pass")

    ne = verify_ne(scenario, cand, nu, search)
    report.sections.setdefault("ne_reports", {})["candidate"] = ne.to_dict()
    detail = f"worst gain {ne.worst_deviation.gain:.6g}" if ne.worst_deviation else ""
    if ne.is_epsilon_ne:
        report.add("candidate_is_epsilon_ne", "pass", detail)
    else:
        report.add("candidate_is_epsilon_ne", "fail" if resource else "flag", detail)

    if resource and scenario.index_sets.edges_of_traveler:
        pert = verify_ne(scenario, _perturbed(cand, 1.0 / 12.0), nu, search)
        gain = pert.worst_deviation.gain if pert.worst_deviation else 0.0
        report.add("perturbed_price_detected", _ok(not pert.is_epsilon_ne),
                   f"gain {gain:.6g}")

    brd = best_response_dynamics(scenario, default_initial_profile(scenario), nu, search)
    report.trajectory = brd.trajectory
    brd_ne = verify_ne(scenario, brd.profile, nu, search)
    report.sections["best_response"] = {
        "status": brd.status, "sweeps": brd.sweeps, "nu_mode": brd.nu_mode,
        "final_profile": brd.profile.to_dict(), "max_infeasibility": brd.max_infeasibility}
    report.sections["ne_reports"]["best_response_final"] = brd_ne.to_dict()
    report.add("brd_iterates_feasible", _ok(brd.max_infeasibility <= FEAS_TOL),
               f"max violation {brd.max_infeasibility:.3e}")
    report.add("brd_status", "info", f"{brd.status} after {brd.sweeps} sweeps; "
               f"final profile is eps-NE: {brd_ne.is_epsilon_ne}")
    verified = [("candidate", cand)] if ne.is_epsilon_ne else []
    if brd_ne.is_epsilon_ne:
        verified.append(("best_response_final", brd.profile))
    return cand, verified


def _run_properties(scenario, report, result, cand, verified):
    resource = scenario.orientation == RESOURCE_MODE
    props = verify_properties(scenario, cand, result)
    report.sections.setdefault("property_reports", {})["candidate"] = props.to_dict()
    if cand.flags:
        report.add("budget_balance_candidate", "flag",
                   f"candidate carries penalties; |sum t| = {props.budget_residual:.3g}")
    else:
        report.add("budget_balance_candidate", _ok(props.budget_residual <= BUDGET_TOL),
                   f"|sum t| = {props.budget_residual:.3e}")
    gaps = [abs(u - cf) for u, cf in props.no_participation.values()]
    nonneg = all(u >= 0 for u, _ in props.no_participation.values())
    worst_gap = max(gaps, default=0.0)
    report.add("no_participation_closed_form", _ok(worst_gap <= NOPART_TOL and nonneg),
               f"max gap {worst_gap:.3e}")

    if not verified:
        status = "fail" if resource else "flag"
        msg = "no verified eps-NE among candidate and best-response profile"
        for name in ("ir_at_ne", "price_alignment_at_ne", "zero_penalty_at_ne",
                     "strong_implementation_at_ne"):
            report.add(name, status, msg)
        return
    reports = {}
    for label, prof in verified:
        reports[label] = verify_properties(scenario, prof, result)
        report.sections["property_reports"][label] = reports[label].to_dict()

    def gate(name, ok_fn, detail_fn):
        bad = [lab for lab, r in reports.items() if not ok_fn(r)]
        detail = "; ".join(f"{lab}: {detail_fn(r)}" for lab, r in reports.items())
        if not bad:
            report.add(name, "pass", detail)
        else:
            report.add(name, "fail" if resource else "flag", detail)

    gate("ir_at_ne", lambda r: not r.ir_violations, lambda r: f"violations {r.ir_violations}")
    gate("price_alignment_at_ne", lambda r: r.price_alignment_residual <= PRICE_TOL,
         lambda r: f"max |tau - nu| {r.price_alignment_residual:.3e}")
    gate("zero_penalty_at_ne", lambda r: all(v == 0 for v in r.penalty_at_ne.values()),
         lambda r: f"penalties {r.penalty_at_ne}")
    gate("strong_implementation_at_ne", lambda r: r.implementation_distance <= IMPL_TOL,
         lambda r: f"distance {r.implementation_distance:.3e}")


def run_suite(scenario, suite_name, profile=None, nu=None, search=None, epsilon=None):
    """Run one named suite (solve | mechanism-eval | find-ne | verify | full)."""
    if suite_name not in SUITES:
        raise UsageError(f"unknown suite {suite_name!r}; choose from {SUITES}")
    search = search or DeviationSearchConfig()
    if epsilon is not None:
        search = dataclasses.replace(search, epsilon_ne=float(epsilon))
    report = SuiteReport(scenario.name, suite_name)
    report.sections["metadata"] = dict(scenario.metadata)
    clock = time.perf_counter()

    t0 = time.perf_counter()
    result = _run_solve(scenario, report, with_oracle=suite_name in ("solve", "full"))
    report.timing["solve"] = time.perf_counter() - t0
    if result is None:
        report.timing["total"] = time.perf_counter() - clock
        return report
    nu_star = result.certificate.nu

    if suite_name in ("mechanism-eval", "full"):
        t0 = time.perf_counter()
        if profile is None:
            prof, nu_used = construct_candidate_ne(scenario, result), nu_star
        else:
            prof, nu_used = profile, (nu if nu is not None else nu_star)
        _run_mechanism_eval(scenario, report, prof, nu_used,
                            n_random=RANDOM_PROFILES if suite_name == "full" else 0,
                            seed=scenario.solver.seed)
        report.timing["mechanism"] = time.perf_counter() - t0

    if suite_name in ("find-ne", "verify", "full"):
        t0 = time.perf_counter()
        cand, verified = _run_find_ne(scenario, report, result, search)
        report.timing["find_ne"] = time.perf_counter() - t0
        if suite_name in ("verify", "full"):
            t0 = time.perf_counter()
            _run_properties(scenario, report, result, cand, verified)
            report.timing["verify"] = time.perf_counter() - t0

    report.timing["total"] = time.perf_counter() - clock
    return report
