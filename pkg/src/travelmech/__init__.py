"""Toll-and-allocation mechanism for travel-time sharing on capacitated networks.

Travelers on fixed routes share edge capacity.  A central planner would
split each edge's capacity to maximise total valuation; the mechanism here
asks each traveler for a demanded time and a bid price per edge, projects
the demands onto the feasible set and charges tolls.  The package solves the
central problem with a KKT certificate, evaluates the mechanism, searches for
profitable deviations and checks the economic properties of equilibria.
"""

from .errors import (DomainError, GenerationError, InfeasibleError, InvalidAttributeError,
                     MechanismError, NonConvergenceError, OracleScopeError, PreconditionError,
                     ScenarioParseError, StructuralError, UsageError)
from .game import (BRDResult, CandidateProfile, Deviation, DeviationSearchConfig, NEReport,
                   PropertyReport, best_deviation, best_response_dynamics,
                   construct_candidate_ne, no_participation_closed_form,
                   no_participation_utility, utility, verify_ne, verify_properties)
from .harness import SuiteReport, run_suite
from .mechanism import (COMPETITOR_PROXY, EXTERNAL_CERTIFICATE, MechanismParams, Message,
                        MessageProfile, Outcome, edge_payment, outcome, penalty,
                        project_to_feasible)
from .network import (Edge, IndexSets, Network, Route, Traveler, build_network,
                      derive_index_sets, validate_scenario)
from .scenario import (Scenario, generate_random_scenario, load_profile, load_scenario,
                       save_scenario)
from .solver import (Allocation, KKTCertificate, SolverConfig, SolverResult,
                     brute_force_oracle, kkt_residuals, social_welfare, solve_centralized,
                     solve_from_random_starts)
from .valuation import (PAPER_LITERAL, RESOURCE_MODE, ValuationSpec, check_assumption1,
                        eval_valuation, valuation_derivative)

__version__ = "0.1.0"

__all__ = [
    "Allocation", "BRDResult", "COMPETITOR_PROXY", "CandidateProfile", "Deviation",
    "DeviationSearchConfig", "DomainError", "EXTERNAL_CERTIFICATE", "Edge",
    "GenerationError", "IndexSets", "InfeasibleError", "InvalidAttributeError",
    "KKTCertificate", "MechanismError", "MechanismParams", "Message", "MessageProfile",
    "NEReport", "Network", "NonConvergenceError", "OracleScopeError", "Outcome",
    "PAPER_LITERAL", "PreconditionError", "PropertyReport", "RESOURCE_MODE", "Route",
    "Scenario", "ScenarioParseError", "SolverConfig", "SolverResult", "StructuralError",
    "SuiteReport", "Traveler", "UsageError", "ValuationSpec", "best_deviation",
    "best_response_dynamics", "brute_force_oracle", "build_network",
    "check_assumption1", "construct_candidate_ne", "derive_index_sets", "edge_payment",
    "eval_valuation", "generate_random_scenario", "kkt_residuals", "load_profile",
    "load_scenario", "no_participation_closed_form", "no_participation_utility",
    "outcome", "penalty", "project_to_feasible", "run_suite", "save_scenario",
    "social_welfare", "solve_centralized", "solve_from_random_starts", "utility",
    "validate_scenario", "valuation_derivative", "verify_ne", "verify_properties",
]
