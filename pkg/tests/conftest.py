import pytest

from travelmech.network import Traveler, build_network
from travelmech.scenario import Scenario
from travelmech.solver import solve_centralized
from travelmech.valuation import ValuationSpec


def single_edge(valuations, capacity=10.0, lower=1.0, alphas=None, **meta):
    """Two-vertex network with one edge shared by every traveler."""
    net = build_network(["1", "2"], [("e", "1", "2", capacity, lower)])
    alphas = alphas or [1.0] * len(valuations)
    travelers = [Traveler(str(k + 1), "1", "2", ["e"], a, v)
                 for k, (v, a) in enumerate(zip(valuations, alphas))]
    return Scenario(net, tuple(travelers), metadata=dict(meta))


def log_res(a):
    return ValuationSpec("log_resource", {"a": a})


def neg_quad(a=1.0, b=0.0):
    return ValuationSpec("neg_quadratic", {"a": a, "b": b})


@pytest.fixture
def worked():
    return single_edge([log_res(2.0), log_res(3.0)], name="worked")


@pytest.fixture
def worked_result(worked):
    return solve_centralized(worked)


@pytest.fixture
def literal_shared():
    return single_edge([neg_quad(), neg_quad()], name="literal-shared")


@pytest.fixture
def solo_literal():
    return single_edge([neg_quad()], name="solo")


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
