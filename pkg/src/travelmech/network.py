"""Road graph, fixed traveler routes and the competition index sets.

Identifiers (vertices, edges, travelers) are normalised to ``str`` so that
scenario files round-trip and iteration order never depends on hashing.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidAttributeError, StructuralError
from .valuation import ValuationSpec, check_assumption1, max_abs_value

DEFAULT_ALPHA_BOUNDS = (1.0, 10.0)


def id_key(x):
    """Sort key: numeric ids in numeric order, then everything else lexically."""
    s = str(x)
    if re.fullmatch(r"-?\d+", s):
        return (0, int(s), s)
    return (1, 0, s)


def sorted_ids(ids):
    return tuple(sorted((str(i) for i in ids), key=id_key))


@dataclass(frozen=True)
class Edge:
    id: str
    tail: str
    head: str
    capacity: float
    min_travel_time: float

    def __post_init__(self):
        for name in ("id", "tail", "head"):
            object.__setattr__(self, name, str(getattr(self, name)))
        cap, lo = float(self.capacity), float(self.min_travel_time)
        if not math.isfinite(cap) or cap <= 0:
            raise InvalidAttributeError(f"edge {self.id}: capacity must be > 0, got {self.capacity}")
        if not math.isfinite(lo) or lo < 0:
            raise InvalidAttributeError(
                f"edge {self.id}: min_travel_time must be >= 0, got {self.min_travel_time}")
        object.__setattr__(self, "capacity", cap)
        object.__setattr__(self, "min_travel_time", lo)


@dataclass(frozen=True)
class Network:
    vertices: tuple
    edges: dict  # edge id -> Edge, insertion ordered

    def edge(self, edge_id):
        try:
            return self.edges[str(edge_id)]
        except KeyError:
            raise StructuralError(f"unknown edge {edge_id!r}") from None

    @property
    def edge_ids(self):
        return tuple(self.edges)


def build_network(vertices, edge_list):
    """Validate and assemble a :class:`Network`.

    ``edge_list`` items may be :class:`Edge` instances, mappings with the
    Edge field names, or ``(id, tail, head, capacity, min_travel_time)`` tuples.
    """
    verts = tuple(str(v) for v in vertices)
    if len(set(verts)) != len(verts):
        raise InvalidAttributeError("duplicate vertex ids")
    vset = set(verts)
    edges = {}
    for item in edge_list:
        if isinstance(item, Edge):
            e = item
        elif isinstance(item, dict):
            e = Edge(**item)
        else:
            e = Edge(*item)
        if e.tail not in vset or e.head not in vset:
            raise StructuralError(f"edge {e.id}: endpoint not in vertex set")
        if e.id in edges:
            raise InvalidAttributeError(f"duplicate edge id {e.id!r}")
        edges[e.id] = e
    return Network(vertices=verts, edges=edges)


@dataclass(frozen=True)
class Route:
    traveler_id: str
    edge_sequence: tuple

    def __post_init__(self):
        object.__setattr__(self, "traveler_id", str(self.traveler_id))
        object.__setattr__(self, "edge_sequence", tuple(str(e) for e in self.edge_sequence))
        if not self.edge_sequence:
            raise StructuralError(f"traveler {self.traveler_id}: empty route")
        if len(set(self.edge_sequence)) != len(self.edge_sequence):
            raise StructuralError(f"traveler {self.traveler_id}: route repeats an edge")


@dataclass(frozen=True)
class Traveler:
    id: str
    origin: str
    destination: str
    route: Route
    alpha: float
    valuation: ValuationSpec

    def __post_init__(self):
        for name in ("id", "origin", "destination"):
            object.__setattr__(self, name, str(getattr(self, name)))
        if not isinstance(self.route, Route):
            object.__setattr__(self, "route", Route(self.id, self.route))
        alpha = float(self.alpha)
        if not math.isfinite(alpha) or alpha < 1.0:
            raise InvalidAttributeError(f"traveler {self.id}: alpha must be >= 1, got {self.alpha}")
        object.__setattr__(self, "alpha", alpha)


def validate_route(network, traveler):
    """Raise StructuralError unless the route is a connected o-d walk over known edges."""
    seq = traveler.route.edge_sequence
    edges = [network.edge(e) for e in seq]
    if edges[0].tail != traveler.origin:
        raise StructuralError(f"traveler {traveler.id}: route does not start at origin")
    if edges[-1].head != traveler.destination:
        raise StructuralError(f"traveler {traveler.id}: route does not end at destination")
    for prev, nxt in zip(edges, edges[1:]):
        if prev.head != nxt.tail:
            raise StructuralError(
                f"traveler {traveler.id}: edges {prev.id} and {nxt.id} are not connected")


@dataclass(frozen=True)
class IndexSets:
    travelers_on_edge: dict  # edge id -> tuple of traveler ids (S_e), sorted
    edges_of_traveler: dict  # traveler id -> tuple of edge ids (R_i), route order

    def competitors(self, edge_id):
        return len(self.travelers_on_edge[edge_id])


def derive_index_sets(network, travelers):
    users = {e: [] for e in network.edges}
    own = {}
    for t in travelers:
        for e in t.route.edge_sequence:
            if e not in users:
                raise StructuralError(f"traveler {t.id}: route uses unknown edge {e!r}")
            users[e].append(t.id)
        own[t.id] = t.route.edge_sequence
    return IndexSets(
        travelers_on_edge={e: sorted_ids(ids) for e, ids in users.items()},
        edges_of_traveler={tid: own[tid] for tid in sorted_ids(own)},
    )


@dataclass
class ValidationReport:
    edge_feasible: dict = field(default_factory=dict)   # edge id -> bool
    edge_lower_load: dict = field(default_factory=dict)  # edge id -> sum alpha * lower bound
    valuation_violations: dict = field(default_factory=dict)  # traveler id -> [str]
    alpha_violations: list = field(default_factory=list)
    orientation_consistent: bool = True
    penalty_scale_ok: bool = True

    @property
    def feasible(self):
        return all(self.edge_feasible.values())

    @property
    def passed(self):
        return (self.feasible and not self.valuation_violations and not self.alpha_violations
                and self.orientation_consistent)

    def to_dict(self):
        return {
            "feasible": self.feasible,
            "passed": self.passed,
            "edge_feasible": dict(self.edge_feasible),
            "edge_lower_load": dict(self.edge_lower_load),
            "valuation_violations": dict(self.valuation_violations),
            "alpha_violations": list(self.alpha_violations),
            "orientation_consistent": self.orientation_consistent,
            "penalty_scale_ok": self.penalty_scale_ok,
        }


def validate_scenario(scenario):
    """Feasibility of the lower-bound point plus per-traveler sanity flags.

    Never raises for a structurally loaded scenario; every problem becomes a
    field of the returned :class:`ValidationReport`.
    """
    net = scenario.network
    idx = scenario.index_sets
    by_id = {t.id: t for t in scenario.travelers}
    report = ValidationReport()
    for eid, edge in net.edges.items():
        load = sum(by_id[i].alpha for i in idx.travelers_on_edge[eid]) * edge.min_travel_time
        report.edge_lower_load[eid] = load
        report.edge_feasible[eid] = load <= edge.capacity

    lo, hi = scenario.alpha_bounds
    orientations = set()
    biggest = 0.0
    for t in scenario.travelers:
        if not lo <= t.alpha <= hi:
            report.alpha_violations.append(t.id)
        orientations.add(t.valuation.orientation)
        top = max(net.edges[e].capacity / t.alpha for e in t.route.edge_sequence)
        grid = np.linspace(0.0, max(top, 1.0), 9)
        res = check_assumption1(t.valuation, grid)
        if not res.passed:
            report.valuation_violations[t.id] = res.violations
        biggest = max(biggest, max_abs_value(t.valuation, 0.0, max(top, 1.0)))
    report.orientation_consistent = len(orientations) <= 1 and (
        not orientations or orientations == {scenario.orientation})
    mech = scenario.mechanism
    report.penalty_scale_ok = min(mech.gamma, mech.delta) >= 1e3 * biggest
    return report
