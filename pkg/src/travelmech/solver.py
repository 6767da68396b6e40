"""Centralized welfare maximisation with a KKT certificate, plus a grid oracle.

The decision variables are the per-edge travel times theta[i, e] for every
traveler i and every edge e on i's route.  Constraints::

    theta[i, e] >= lower[e]
    sum_{i on e} alpha[i] * theta[i, e] <= capacity[e]

Each variable belongs to exactly one edge, so the feasible set is a product
of per-edge "box plus weighted half-space" sets and its Euclidean projection
decomposes edge by edge.  The solver is projected gradient ascent with
Barzilai-Borwein steps and an Armijo safeguard.  Multipliers are read off
the projection itself: at a fixed point ``x = P(x + s*g)`` the shift
``kappa`` applied on edge e equals ``s * nu[e]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError, NonConvergenceError, OracleScopeError, StructuralError

_FAMILY_CODE = {"neg_quadratic": 0, "neg_exponential": 1, "log_resource": 2}


@dataclass(frozen=True)
class SolverConfig:
    kkt_tol: float = 1e-6
    solution_tol: float = 1e-6
    max_iterations: int = 100_000
    grid_step: float = 0.01
    random_starts: int = 10
    seed: int = 0

    def to_dict(self):
        return {"kkt_tol": self.kkt_tol, "solution_tol": self.solution_tol,
                "max_iterations": self.max_iterations, "grid_step": self.grid_step,
                "random_starts": self.random_starts, "seed": self.seed}

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown solver_config keys {sorted(unknown)}")
        cfg = cls(**data)
        if cfg.kkt_tol <= 0 or cfg.solution_tol <= 0 or cfg.grid_step <= 0:
            raise ValueError("solver tolerances and grid_step must be > 0")
        if cfg.max_iterations < 1 or cfg.random_starts < 1:
            raise ValueError("max_iterations and random_starts must be >= 1")
        return cfg


@dataclass
class Allocation:
    theta: dict  # (traveler id, edge id) -> travel time

    def totals(self):
        out = {}
        for (tid, _), val in self.theta.items():
            out[tid] = out.get(tid, 0.0) + val
        return out

    def distance(self, other):
        """Infinity-norm distance over the union of keys (missing = 0)."""
        keys = set(self.theta) | set(other.theta)
        if not keys:
            return 0.0
        return max(abs(self.theta.get(k, 0.0) - other.theta.get(k, 0.0)) for k in keys)

    def to_dict(self):
        nested = {}
        for (tid, eid), val in self.theta.items():
            nested.setdefault(tid, {})[eid] = val
        return nested


@dataclass
class KKTCertificate:
    lam: dict  # (traveler id, edge id) -> lambda >= 0
    nu: dict   # edge id -> nu >= 0
    residuals: dict = field(default_factory=dict)

    def valid(self, tol):
        return all(r <= tol for r in self.residuals.values())

    def to_dict(self):
        lam = {}
        for (tid, eid), val in self.lam.items():
            lam.setdefault(tid, {})[eid] = val
        return {"lambda": lam, "nu": dict(self.nu), "residuals": dict(self.residuals)}


@dataclass
class SolverResult:
    allocation: Allocation
    certificate: KKTCertificate
    welfare: float
    iterations: int
    converged: bool

    def summary(self):
        return {"allocation": self.allocation.to_dict(), "certificate": self.certificate.to_dict(),
                "welfare": self.welfare, "iterations": self.iterations,
                "converged": self.converged}


class _Layout:
    """Flat arrays describing the variables of one scenario."""

    def __init__(self, scenario):
        idx = scenario.index_sets
        by_id = {t.id: t for t in scenario.travelers}
        self.pairs = []
        for tid, route in idx.edges_of_traveler.items():
            for eid in route:
                self.pairs.append((tid, eid))
        n = len(self.pairs)
        self.alpha = np.empty(n)
        self.lower = np.empty(n)
        self.fam = np.empty(n, dtype=int)
        self.p1 = np.empty(n)
        self.p2 = np.zeros(n)
        self.edge_of = []
        for k, (tid, eid) in enumerate(self.pairs):
            t = by_id[tid]
            spec = t.valuation
            self.alpha[k] = t.alpha
            self.lower[k] = scenario.network.edges[eid].min_travel_time
            self.fam[k] = _FAMILY_CODE[spec.family]
            self.p1[k] = spec.params["a"]
            if spec.family == "neg_quadratic":
                self.p2[k] = spec.params["b"]
            elif spec.family == "neg_exponential":
                self.p2[k] = spec.params["c"]
            self.edge_of.append(eid)
        self.edges = []  # (edge id, index array, capacity, lower)
        for eid, users in idx.travelers_on_edge.items():
            if not users:
                continue
            members = np.array([k for k, p in enumerate(self.pairs) if p[1] == eid], dtype=int)
            edge = scenario.network.edges[eid]
            self.edges.append((eid, members, edge.capacity, edge.min_travel_time))
        self.upper = self.lower.copy()
        for _, members, cap, lo in self.edges:
            a = self.alpha[members]
            self.upper[members] = lo + (cap - lo * a.sum()) / a

    def value(self, x):
        out = np.empty_like(x)
        q, e, r = self.fam == 0, self.fam == 1, self.fam == 2
        out[q] = -self.p1[q] * x[q] ** 2 - self.p2[q] * x[q]
        out[e] = -self.p1[e] * np.expm1(self.p2[e] * x[e])
        out[r] = self.p1[r] * np.log1p(x[r])
        return out

    def value_at(self, k, xs):
        """Values of variable k's valuation at the points xs."""
        xs = np.asarray(xs, dtype=float)
        a, b = self.p1[k], self.p2[k]
        if self.fam[k] == 0:
            return -a * xs**2 - b * xs
        if self.fam[k] == 1:
            return -a * np.expm1(b * xs)
        return a * np.log1p(xs)

    def grad(self, x):
        out = np.empty_like(x)
        q, e, r = self.fam == 0, self.fam == 1, self.fam == 2
        out[q] = -2.0 * self.p1[q] * x[q] - self.p2[q]
        out[e] = -self.p1[e] * self.p2[e] * np.exp(self.p2[e] * x[e])
        out[r] = self.p1[r] / (1.0 + x[r])
        return out

    def curvature(self, x):
        out = np.empty_like(x)
        q, e, r = self.fam == 0, self.fam == 1, self.fam == 2
        out[q] = 2.0 * self.p1[q]
        out[e] = self.p1[e] * self.p2[e] ** 2 * np.exp(self.p2[e] * x[e])
        out[r] = self.p1[r] / (1.0 + x[r]) ** 2
        return out

    def project(self, y):
        """Euclidean projection; returns (x, kappa per edge)."""
        x = np.maximum(y, self.lower)
        kappas = {}
        for eid, members, cap, lo in self.edges:
            xe, kappa = project_edge(y[members], self.alpha[members], lo, cap)
            x[members] = xe
            kappas[eid] = kappa
        return x, kappas

    def to_allocation(self, x):
        return Allocation({p: float(v) for p, v in zip(self.pairs, x)})

    def from_allocation(self, allocation):
        try:
            return np.array([allocation.theta[p] for p in self.pairs], dtype=float)
        except KeyError as exc:
            raise StructuralError(f"allocation missing entry {exc.args[0]}") from None


def project_edge(y, alpha, lower, capacity):
    """Project y onto {x >= lower, alpha . x <= capacity}.

    The solution is ``x = max(y - kappa*alpha, lower)`` with the smallest
    kappa >= 0 that makes the capacity constraint hold.  kappa is found
    exactly by walking the sorted breakpoints of the piecewise-linear load.
    """
    x = np.maximum(y, lower)
    if alpha @ x <= capacity:
        return x, 0.0
    # breakpoints where coordinate j hits its lower bound
    bp = (y - lower) / alpha
    order = np.argsort(-bp)
    base = lower * alpha.sum()  # load when everything sits at the bound
    s_ay = 0.0   # sum alpha*y over active coordinates
    s_aa = 0.0   # sum alpha^2 over active coordinates
    s_al = 0.0   # sum alpha*lower over active coordinates
    kappa = 0.0
    for pos, j in enumerate(order):
        s_ay += alpha[j] * y[j]
        s_aa += alpha[j] ** 2
        s_al += alpha[j] * lower
        kappa = (s_ay + (base - s_al) - capacity) / s_aa
        nxt = bp[order[pos + 1]] if pos + 1 < len(order) else -np.inf
        if kappa >= nxt:
            break
    kappa = max(kappa, 0.0)
    return np.maximum(y - kappa * alpha, lower), float(kappa)


def _check_feasible(layout):
    for eid, members, cap, lo in layout.edges:
        load = lo * layout.alpha[members].sum()
        if load > cap * (1 + 1e-12):
            raise InfeasibleError(
                f"edge {eid}: lower-bound load {load:g} exceeds capacity {cap:g}")


def _certificate(layout, x, step):
    g = layout.grad(x)
    _, kappas = layout.project(x + step * g)
    nu_pair = np.zeros_like(x)
    nu = {}
    for eid, members, _, _ in layout.edges:
        nu[eid] = kappas[eid] / step
        nu_pair[members] = nu[eid]
    lam = np.maximum(0.0, layout.alpha * nu_pair - g)
    return lam, nu


def _residuals(layout, x, lam, nu_pair, nu_by_edge):
    g = layout.grad(x)
    res = {
        "stationarity": float(np.max(np.abs(g + lam - layout.alpha * nu_pair), initial=0.0)),
        "complementary_slackness_lower": float(np.max(np.abs(lam * (x - layout.lower)), initial=0.0)),
        "complementary_slackness_capacity": 0.0,
        "dual_feasibility": float(max(0.0, np.max(-lam, initial=0.0),
                                      max((-v for v in nu_by_edge.values()), default=0.0))),
        "primal_feasibility": float(max(0.0, np.max(layout.lower - x, initial=0.0))),
    }
    for eid, members, cap, _ in layout.edges:
        slack = layout.alpha[members] @ x[members] - cap
        res["complementary_slackness_capacity"] = max(
            res["complementary_slackness_capacity"], abs(nu_by_edge[eid] * slack))
        res["primal_feasibility"] = max(res["primal_feasibility"], float(slack))
    return res


def kkt_residuals(scenario, allocation, lam, nu):
    """Infinity-norm residual of each KKT condition at (allocation, lam, nu).

    Stationarity is taken per variable: v'(theta[i,e]) + lam[i,e] - alpha[i]*nu[e].
    """
    layout = _Layout(scenario)
    x = layout.from_allocation(allocation)
    try:
        lam_arr = np.array([lam[p] for p in layout.pairs], dtype=float)
    except KeyError as exc:
        raise StructuralError(f"missing lambda entry {exc.args[0]}") from None
    nu_by_edge = {}
    nu_pair = np.zeros_like(x)
    for eid, members, _, _ in layout.edges:
        if eid not in nu:
            raise StructuralError(f"missing nu entry for edge {eid!r}")
        nu_by_edge[eid] = float(nu[eid])
        nu_pair[members] = nu_by_edge[eid]
    return _residuals(layout, x, lam_arr, nu_pair, nu_by_edge)


def social_welfare(scenario, allocation):
    layout = _Layout(scenario)
    if not layout.pairs:
        return 0.0
    return float(layout.value(layout.from_allocation(allocation)).sum())


def solve_centralized(scenario, config=None, start=None):
    """Maximise total satisfaction subject to lower bounds and edge capacities.

    ``start`` is an optional Allocation (or array in variable order) used as
    the initial iterate; it is projected first, so it need not be feasible.
    Raises InfeasibleError for an empty feasible set and NonConvergenceError
    (carrying the best iterate) if no certificate is reached.
    """
    config = config or scenario.solver
    layout = _Layout(scenario)
    _check_feasible(layout)
    n = len(layout.pairs)
    empty = KKTCertificate(lam={}, nu={e: 0.0 for e in scenario.network.edges},
                           residuals=dict.fromkeys(
                               ("stationarity", "complementary_slackness_lower",
                                "complementary_slackness_capacity", "dual_feasibility",
                                "primal_feasibility"), 0.0))
    if n == 0:
        return SolverResult(Allocation({}), empty, 0.0, 0, True)

    if start is None:
        y = layout.lower.copy()
    elif isinstance(start, Allocation):
        y = layout.from_allocation(start)
    else:
        y = np.asarray(start, dtype=float).copy()
    x, _ = layout.project(y)
    f = float(layout.value(x).sum())
    g = layout.grad(x)
    step = 1.0 / max(float(np.max(layout.curvature(x))), 1e-12)
    x_prev = g_prev = None
    iterations = 0
    pg_tol = 1e-13 * (1.0 + float(np.max(np.abs(x))))

    def certify(xc):
        s = 1.0 / max(float(np.max(layout.curvature(xc))), 1e-12)
        lam, nu = _certificate(layout, xc, s)
        nu_pair = np.zeros_like(xc)
        for eid, members, _, _ in layout.edges:
            nu_pair[members] = nu[eid]
        res = _residuals(layout, xc, lam, nu_pair, nu)
        return lam, nu, res

    while iterations < config.max_iterations:
        iterations += 1
        pg = np.max(np.abs(x - layout.project(x + g)[0]))
        if pg <= pg_tol:
            break
        if x_prev is not None:
            dx, dg = x - x_prev, g - g_prev
            denom = -float(dx @ dg)
            if denom > 0:
                step = float(dx @ dx) / denom
        step = min(max(step, 1e-14), 1e14)
        while True:
            x_new, _ = layout.project(x + step * g)
            f_new = float(layout.value(x_new).sum())
            if f_new >= f + 1e-4 * float(g @ (x_new - x)) - 1e-15 * abs(f) or step < 1e-14:
                break
            step *= 0.5
        x_prev, g_prev = x, g
        x, f = x_new, f_new
        g = layout.grad(x)
        if np.array_equal(x, x_prev):
            break

    lam, nu, res = certify(x)
    cert = KKTCertificate(
        lam={p: float(v) for p, v in zip(layout.pairs, lam)},
        nu={e: float(nu.get(e, 0.0)) for e in scenario.network.edges},
        residuals=res,
    )
    result = SolverResult(layout.to_allocation(x), cert, float(layout.value(x).sum()),
                          iterations, cert.valid(config.kkt_tol))
    if not result.converged:
        raise NonConvergenceError(
            f"no KKT certificate at tol {config.kkt_tol:g} after {iterations} iterations "
            f"(residuals {res})", best=result)
    return result


def random_start(scenario, rng):
    """Uniform draw from the per-variable box [lower, capacity/alpha]."""
    layout = _Layout(scenario)
    hi = np.array([scenario.network.edges[e].capacity for e in layout.edge_of]) / layout.alpha
    return rng.uniform(layout.lower, np.maximum(hi, layout.lower))


def solve_from_random_starts(scenario, config=None):
    """Solve from ``config.random_starts`` random points; returns (results, spread)."""
    config = config or scenario.solver
    rng = np.random.default_rng(config.seed)
    results = [solve_centralized(scenario, config, start=random_start(scenario, rng))
               for _ in range(config.random_starts)]
    spread = max((results[0].allocation.distance(r.allocation) for r in results[1:]),
                 default=0.0)
    return results, spread


def brute_force_oracle(scenario, grid_step, max_points=20_000_000):
    """Best point of the lattice {lower, lower + h, ...} under the capacity constraints.

    Objective and constraints are separable by edge, so each edge is searched
    on its own.  Within an edge all coordinates but the last are enumerated;
    for the last one the best admissible lattice value is a prefix maximum,
    which gives the exact lattice optimum without a further loop.  Ties go to
    the lexicographically smallest lattice index.
    """
    layout = _Layout(scenario)
    if len(layout.pairs) > 6:
        raise OracleScopeError(f"oracle limited to 6 variables, got {len(layout.pairs)}")
    _check_feasible(layout)
    h = float(grid_step)
    x = np.empty(len(layout.pairs))
    for _, members, cap, lo in layout.edges:
        a = layout.alpha[members]
        slack = cap - lo * a.sum()
        counts = [int(math.floor(slack / (aj * h) + 1e-9)) + 1 for aj in a]
        grids = [lo + h * np.arange(k) for k in counts]
        vals = [layout.value_at(members[j], grids[j]) for j in range(len(members))]
        points = int(np.prod(counts[:-1], dtype=float)) if len(members) > 1 else 1
        if points > max_points:
            raise OracleScopeError(f"oracle grid too large ({points} points)")
        x[members] = _edge_lattice_optimum(grids, vals, a, cap)
    return layout.to_allocation(x)


def _edge_lattice_optimum(grids, vals, alpha, cap):
    tol = 1e-9 * max(1.0, cap)
    m = len(grids)
    last_vals = vals[-1]
    if m == 1:
        return np.array([grids[0][int(np.argmax(last_vals))]])
    # prefix max / argmax of the last coordinate's values
    pref = np.maximum.accumulate(last_vals)
    pref_arg = np.zeros(len(last_vals), dtype=int)
    best_k = 0
    for k in range(1, len(last_vals)):
        if last_vals[k] > last_vals[best_k]:
            best_k = k
        pref_arg[k] = best_k
    lo_last = grids[-1][0]
    h = grids[-1][1] - grids[-1][0] if len(grids[-1]) > 1 else 1.0

    best_val, best_pt = -np.inf, None
    outer_ranges = [range(len(gr)) for gr in grids[:-2]]
    for head in itertools.product(*outer_ranges):
        used = sum(alpha[j] * grids[j][k] for j, k in enumerate(head))
        head_val = sum(vals[j][k] for j, k in enumerate(head))
        rem = cap - used - alpha[-1] * lo_last - alpha[-2] * grids[-2]
        ok = rem >= -tol
        if not np.any(ok):
            continue
        kmax = np.floor(np.maximum(rem, 0.0) / (alpha[-1] * h) + 1e-9).astype(int)
        kmax = np.minimum(kmax, len(last_vals) - 1)
        total = np.where(ok, head_val + vals[-2] + pref[kmax], -np.inf)
        j = int(np.argmax(total))
        if total[j] > best_val:
            best_val = float(total[j])
            best_pt = [grids[t][k] for t, k in enumerate(head)]
            best_pt += [grids[-2][j], grids[-1][pref_arg[kmax[j]]]]
    return np.array(best_pt)
