import pytest

from travelmech.errors import InvalidAttributeError, StructuralError
from travelmech.network import (Edge, Route, Traveler, build_network, derive_index_sets,
                                id_key, validate_scenario)
from travelmech.scenario import Scenario

from conftest import neg_quad, single_edge


def test_minimal_network():
    net = build_network(["1", "2"], [("e", "1", "2", 10, 1)])
    assert len(net.edges) == 1
    assert net.edge("e").capacity == 10.0


def test_dangling_endpoint():
    with pytest.raises(StructuralError):
        build_network(["1", "2"], [("e", "1", "3", 10, 1)])


def test_duplicate_edge_id():
    with pytest.raises(InvalidAttributeError):
        build_network(["1", "2"], [("e", "1", "2", 10, 1), ("e", "2", "1", 5, 1)])


@pytest.mark.parametrize("cap,lo", [(0.0, 1.0), (-1.0, 1.0), (5.0, -0.5)])
def test_edge_attribute_checks(cap, lo):
    with pytest.raises(InvalidAttributeError, match="edge x"):
        Edge("x", "a", "b", cap, lo)


def test_route_and_traveler_checks():
    with pytest.raises(StructuralError):
        Route("1", [])
    with pytest.raises(StructuralError):
        Route("1", ["a", "a"])
    with pytest.raises(InvalidAttributeError):
        Traveler("1", "1", "2", ["e"], 0.5, neg_quad())


def _chain():
    return build_network(["0", "1", "2", "3"],
                         [("a", "0", "1", 10, 1), ("b", "1", "2", 10, 1), ("c", "2", "3", 10, 1)])


def test_route_must_connect_origin_to_destination():
    net = _chain()
    with pytest.raises(StructuralError):
        Scenario(net, (Traveler("1", "0", "3", ["a", "c"], 1, neg_quad()),))
    with pytest.raises(StructuralError):
        Scenario(net, (Traveler("1", "1", "3", ["a", "b"], 1, neg_quad()),))
    with pytest.raises(StructuralError):
        Scenario(net, (Traveler("1", "0", "1", ["zz"], 1, neg_quad()),))


def test_index_sets_shared_edge(worked):
    idx = worked.index_sets
    assert idx.travelers_on_edge["e"] == ("1", "2")
    assert idx.edges_of_traveler == {"1": ("e",), "2": ("e",)}


def test_index_sets_disjoint():
    net = build_network(["0", "1", "2"], [("a", "0", "1", 10, 1), ("b", "0", "2", 10, 1)])
    trs = (Traveler("1", "0", "1", ["a"], 1, neg_quad()),
           Traveler("2", "0", "2", ["b"], 1, neg_quad()))
    idx = derive_index_sets(net, trs)
    assert idx.travelers_on_edge == {"a": ("1",), "b": ("2",)}


def test_index_sets_three_routes():
    trs = (Traveler("1", "0", "2", ["a", "b"], 1, neg_quad()),
           Traveler("2", "1", "2", ["b"], 1, neg_quad()),
           Traveler("3", "1", "3", ["b", "c"], 1, neg_quad()))
    idx = derive_index_sets(_chain(), trs)
    assert set(idx.travelers_on_edge["b"]) == {"1", "2", "3"}
    assert set(idx.edges_of_traveler["1"]) == {"a", "b"}
    assert idx.travelers_on_edge["a"] == ("1",)
    assert idx.travelers_on_edge["c"] == ("3",)


def test_numeric_ids_sort_numerically():
    assert sorted(["10", "2", "1", "b", "a"], key=id_key) == ["1", "2", "10", "a", "b"]


def test_validate_feasible_pair():
    report = validate_scenario(single_edge([neg_quad(), neg_quad()]))
    assert report.feasible and report.edge_feasible == {"e": True}
    assert report.edge_lower_load["e"] == pytest.approx(2.0)


def test_validate_infeasible_pair():
    report = validate_scenario(single_edge([neg_quad(), neg_quad()], capacity=1.5))
    assert not report.feasible
    assert report.edge_feasible == {"e": False}


def test_validate_empty():
    assert validate_scenario(single_edge([])).feasible


def test_alpha_outside_declared_bounds_is_reported():
    sc = single_edge([neg_quad(), neg_quad()], alphas=[1.0, 12.0])
    report = validate_scenario(sc)
    assert report.alpha_violations and not report.passed
