"""Scenario container, JSON (de)serialisation and seeded random generation.

File layout (JSON)::

    {
      "metadata":  {"name": ..., "seed": ..., "orientation": ..., "alpha_bounds": [1, 10]},
      "network":   {"vertices": [...], "edges": [{"id", "tail", "head",
                                                  "capacity", "min_travel_time"}]},
      "travelers": [{"id", "origin", "destination", "route": [edge ids], "alpha",
                     "valuation": {"family", "params", "orientation"}}],
      "mechanism": {"gamma", "delta", "nu_source"},          # optional
      "solver":    {"kkt_tol", "solution_tol", "max_iterations",
                    "grid_step", "random_starts", "seed"}    # optional
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GenerationError, InvalidAttributeError, MechanismError, ScenarioParseError
from .mechanism import MechanismParams
from .network import (DEFAULT_ALPHA_BOUNDS, Edge, Route, Traveler, build_network,
                      derive_index_sets, validate_route)
from .solver import SolverConfig
from .valuation import ORIENTATIONS, PAPER_LITERAL, RESOURCE_MODE, ValuationSpec


@dataclass(frozen=True)
class Scenario:
    network: object
    travelers: tuple
    mechanism: MechanismParams = field(default_factory=MechanismParams)
    solver: SolverConfig = field(default_factory=SolverConfig)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        travelers = tuple(self.travelers)
        ids = [t.id for t in travelers]
        if len(set(ids)) != len(ids):
            raise InvalidAttributeError("duplicate traveler ids")
        for t in travelers:
            validate_route(self.network, t)
        meta = dict(self.metadata)
        if "orientation" not in meta:
            found = {t.valuation.orientation for t in travelers}
            meta["orientation"] = found.pop() if len(found) == 1 else PAPER_LITERAL
        if meta["orientation"] not in ORIENTATIONS:
            raise InvalidAttributeError(f"metadata.orientation must be one of {ORIENTATIONS}")
        meta["alpha_bounds"] = [float(x) for x in meta.get("alpha_bounds", DEFAULT_ALPHA_BOUNDS)]
        lo, hi = meta["alpha_bounds"]
        if not 1.0 <= lo <= hi:
            raise InvalidAttributeError("metadata.alpha_bounds must satisfy 1 <= lo <= hi")
        meta.setdefault("name", "scenario")
        meta.setdefault("seed", None)
        object.__setattr__(self, "travelers", travelers)
        object.__setattr__(self, "metadata", meta)
        object.__setattr__(self, "index_sets", derive_index_sets(self.network, travelers))

    @property
    def orientation(self):
        return self.metadata["orientation"]

    @property
    def alpha_bounds(self):
        return tuple(self.metadata["alpha_bounds"])

    @property
    def name(self):
        return self.metadata["name"]

    def traveler(self, tid):
        for t in self.travelers:
            if t.id == str(tid):
                return t
        raise KeyError(tid)


def scenario_to_dict(scenario):
    net = scenario.network
    return {
        "metadata": dict(scenario.metadata),
        "network": {
            "vertices": list(net.vertices),
            "edges": [{"id": e.id, "tail": e.tail, "head": e.head, "capacity": e.capacity,
                       "min_travel_time": e.min_travel_time} for e in net.edges.values()],
        },
        "travelers": [{"id": t.id, "origin": t.origin, "destination": t.destination,
                       "route": list(t.route.edge_sequence), "alpha": t.alpha,
                       "valuation": t.valuation.to_dict()} for t in scenario.travelers],
        "mechanism": scenario.mechanism.to_dict(),
        "solver": scenario.solver.to_dict(),
    }


def scenario_from_dict(data):
    try:
        net = data["network"]
        network = build_network(net["vertices"], [Edge(**e) for e in net["edges"]])
        travelers = []
        for t in data.get("travelers", []):
            travelers.append(Traveler(
                id=t["id"], origin=t["origin"], destination=t["destination"],
                route=Route(t["id"], t["route"]), alpha=t.get("alpha", 1.0),
                valuation=ValuationSpec.from_dict(t["valuation"])))
        return Scenario(network=network, travelers=tuple(travelers),
                        mechanism=MechanismParams.from_dict(data.get("mechanism")),
                        solver=SolverConfig.from_dict(data.get("solver")),
                        metadata=dict(data.get("metadata", {})))
    except KeyError as exc:
        raise ScenarioParseError(f"missing field {exc.args[0]!r}") from None
    except TypeError as exc:
        raise ScenarioParseError(f"malformed block: {exc}") from None


def dumps_scenario(scenario):
    return json.dumps(scenario_to_dict(scenario), indent=2) + "\n"


def save_scenario(scenario, path):
    Path(path).write_text(dumps_scenario(scenario))


def load_scenario(path):
    """Parse and structurally validate a scenario file.

    JSON syntax errors become ScenarioParseError with line/column context;
    invariant violations keep their own error type with the offending field
    named in the message.
    """
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ScenarioParseError(f"{path}: top level must be an object")
    try:
        return scenario_from_dict(data)
    except MechanismError as exc:
        raise type(exc)(f"{path}: {exc}") from None
    except ValueError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from None


def load_profile(path):
    from .mechanism import MessageProfile

    try:
        data = json.loads(Path(path).read_text())
        return MessageProfile.from_dict(data), data.get("nu")
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    except (KeyError, TypeError) as exc:
        raise ScenarioParseError(f"{path}: malformed profile ({exc})") from None


# small instances whose data sit on the 0.01 oracle lattice
ORACLE_SIZE = {
    "edges": 2,
    "travelers": 3,
    "max_route_len": 2,
    "orientation": RESOURCE_MODE,
    "alpha_values": [1.0, 2.0],
    "decimals": 2,
}

DEFAULT_SIZE = {
    "edges": 2,
    "travelers": 2,
    "max_route_len": 2,
    "orientation": PAPER_LITERAL,
    "shared_only": False,
    "alpha_range": (1.0, 2.0),
    "alpha_values": None,
    "lower_range": (0.5, 1.5),
    "capacity_factor": (1.5, 2.5),
    "decimals": 4,
}


def _draw_valuation(rng, orientation, r):
    if orientation == RESOURCE_MODE:
        return ValuationSpec("log_resource", {"a": r(rng.uniform(1.0, 3.0))})
    if rng.random() < 0.5:
        return ValuationSpec("neg_quadratic", {"a": r(rng.uniform(0.5, 2.0)),
                                               "b": r(rng.uniform(0.0, 1.0))})
    return ValuationSpec("neg_exponential", {"a": r(rng.uniform(0.5, 2.0)),
                                             "c": r(rng.uniform(0.1, 0.5))})


def generate_random_scenario(seed, size_spec=None):
    """Seeded random scenario on a chain network v0 -> v1 -> ... .

    Routes are contiguous stretches of the chain, so they are always simple
    and connected.  ``alpha_values`` (a list) replaces the continuous
    ``alpha_range`` draw by a choice among fixed weights; with integer
    weights and ``decimals=2`` every bound and capacity lies on the 0.01
    lattice the brute-force oracle uses.  Capacities are a random factor (default 1.5-2.5) times
    the lower-bound load, so the result is always feasible.
    """
    spec = dict(DEFAULT_SIZE)
    spec.update(size_spec or {})
    n_edges, n_trav = int(spec["edges"]), int(spec["travelers"])
    max_len = int(spec["max_route_len"])
    orientation = spec["orientation"]
    if orientation not in ORIENTATIONS:
        raise GenerationError(f"orientation must be one of {ORIENTATIONS}")
    if n_edges < 1 or n_trav < 0 or max_len < 1:
        raise GenerationError("need edges >= 1, travelers >= 0, max_route_len >= 1")
    if spec["shared_only"] and n_trav == 1:
        raise GenerationError("shared_only needs at least two travelers")
    if spec["capacity_factor"][0] < 1.0:
        raise GenerationError("capacity_factor must be >= 1 to stay feasible")

    rng = np.random.default_rng(seed)
    dec = int(spec["decimals"])

    def r(x):
        return float(round(float(x), dec))

    vertices = [f"v{k}" for k in range(n_edges + 1)]
    lowers = [r(rng.uniform(*spec["lower_range"])) for _ in range(n_edges)]

    for _ in range(200):
        routes = []
        for _ in range(n_trav):
            length = int(rng.integers(1, min(max_len, n_edges) + 1))
            start = int(rng.integers(0, n_edges - length + 1))
            routes.append(list(range(start, start + length)))
        counts = [sum(k in rt for rt in routes) for k in range(n_edges)]
        if not spec["shared_only"] or all(c != 1 for c in counts):
            break
    else:
        raise GenerationError("could not draw routes with every used edge shared")

    lo_a, hi_a = spec["alpha_range"]
    alpha_values = spec["alpha_values"]
    if alpha_values:
        if min(alpha_values) < 1.0:
            raise GenerationError("alpha_values must all be >= 1")
        lo_a, hi_a = min(alpha_values), max(alpha_values)
    travelers_raw = []
    for k, rt in enumerate(routes):
        travelers_raw.append({
            "id": str(k + 1), "route": [f"e{j + 1}" for j in rt],
            "origin": vertices[rt[0]], "destination": vertices[rt[-1] + 1],
            "alpha": (float(rng.choice(alpha_values)) if alpha_values
                      else r(rng.uniform(lo_a, hi_a))),
            "valuation": _draw_valuation(rng, orientation, r),
        })

    edges = []
    for k in range(n_edges):
        eid = f"e{k + 1}"
        load = sum(t["alpha"] for t in travelers_raw if eid in t["route"]) * lowers[k]
        factor = rng.uniform(*spec["capacity_factor"])
        cap = load * factor if load > 0 else lowers[k] * factor + 1.0
        # round up so rounding never breaks feasibility
        cap = float(np.ceil(cap * 10**dec) / 10**dec)
        edges.append(Edge(eid, vertices[k], vertices[k + 1], cap, lowers[k]))

    network = build_network(vertices, edges)
    travelers = tuple(Traveler(id=t["id"], origin=t["origin"], destination=t["destination"],
                               route=Route(t["id"], t["route"]), alpha=t["alpha"],
                               valuation=t["valuation"]) for t in travelers_raw)
    bounds = [min(1.0, lo_a), max(DEFAULT_ALPHA_BOUNDS[1], hi_a)]
    meta = {"name": f"random-{seed}", "seed": seed, "orientation": orientation,
            "alpha_bounds": bounds}
    return Scenario(network=network, travelers=travelers, metadata=meta,
                    solver=SolverConfig(seed=int(seed) if seed is not None else 0))
