import json
from pathlib import Path

import pytest

from travelmech.errors import GenerationError, InvalidAttributeError, ScenarioParseError
from travelmech.mechanism import EXTERNAL_CERTIFICATE
from travelmech.network import validate_route, validate_scenario
from travelmech.scenario import (dumps_scenario, generate_random_scenario, load_profile,
                                 load_scenario, save_scenario, scenario_from_dict,
                                 scenario_to_dict)
from travelmech.solver import solve_centralized

FIXTURES = Path(__file__).resolve().parent.parent / "scenarios"


def test_load_worked_fixture():
    sc = load_scenario(FIXTURES / "worked_resource.json")
    assert len(sc.travelers) == 2 and len(sc.network.edges) == 1
    assert sc.orientation == "resource_mode"


def test_round_trip(tmp_path):
    sc = generate_random_scenario(7, {"edges": 3, "travelers": 4, "max_route_len": 3})
    path = tmp_path / "s.json"
    save_scenario(sc, path)
    again = load_scenario(path)
    assert scenario_to_dict(again) == scenario_to_dict(sc)
    assert again == sc


def _worked_dict():
    return json.loads((FIXTURES / "worked_resource.json").read_text())


def test_negative_capacity_names_edge(tmp_path):
    data = _worked_dict()
    data["network"]["edges"][0]["capacity"] = -1
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    with pytest.raises(InvalidAttributeError, match="edge e"):
        load_scenario(path)


def test_missing_mechanism_block_uses_defaults():
    data = _worked_dict()
    del data["mechanism"]
    sc = scenario_from_dict(data)
    assert sc.mechanism.gamma == 1e6 and sc.mechanism.delta == 1e6
    assert sc.mechanism.nu_source == EXTERNAL_CERTIFICATE


def test_syntax_error_has_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"network": {"vertices": [1, 2,]}}')
    with pytest.raises(ScenarioParseError, match="line 1, column"):
        load_scenario(path)


def test_missing_field_is_named():
    data = _worked_dict()
    del data["travelers"][0]["route"]
    with pytest.raises(ScenarioParseError, match="route"):
        scenario_from_dict(data)


def test_profile_fixture():
    prof, nu = load_profile(FIXTURES / "worked_profile_overdemand.json")
    assert prof["1"].demanded_times == {"e": 8.0}
    assert nu == {"e": pytest.approx(5 / 12)}


def test_generator_is_deterministic():
    spec = {"edges": 3, "travelers": 4}
    assert dumps_scenario(generate_random_scenario(42, spec)) == \
        dumps_scenario(generate_random_scenario(42, spec))
    assert dumps_scenario(generate_random_scenario(42, spec)) != \
        dumps_scenario(generate_random_scenario(43, spec))


@pytest.mark.parametrize("seed", range(10))
def test_generator_postconditions(seed):
    sc = generate_random_scenario(seed, {"edges": 3, "travelers": 4, "max_route_len": 3})
    for t in sc.travelers:
        validate_route(sc.network, t)
    report = validate_scenario(sc)
    assert report.passed, report.to_dict()
    for eid, users in sc.index_sets.travelers_on_edge.items():
        if users:
            edge = sc.network.edges[eid]
            load = sum(sc.traveler(t).alpha for t in users) * edge.min_travel_time
            assert edge.capacity >= 1.5 * load - 1e-12


def test_generator_shared_only():
    sc = generate_random_scenario(3, {"edges": 2, "travelers": 3, "shared_only": True})
    assert all(len(u) != 1 for u in sc.index_sets.travelers_on_edge.values())


def test_empty_generated_scenario():
    sc = generate_random_scenario(1, {"travelers": 0})
    assert validate_scenario(sc).passed
    assert solve_centralized(sc).welfare == 0.0


@pytest.mark.parametrize("spec", [
    {"edges": 0},
    {"orientation": "sideways"},
    {"shared_only": True, "travelers": 1},
    {"capacity_factor": (0.5, 0.9)},
    {"alpha_values": [0.5]},
])
def test_unsatisfiable_size_spec(spec):
    with pytest.raises(GenerationError):
        generate_random_scenario(0, spec)
