"""Nash equilibria of a social-distancing game over SIR epidemic dynamics."""

from .best_response import (
    BestResponse,
    BruteForceResult,
    PiecewiseAffineValue,
    auxiliary_cost,
    best_response,
    brute_force_best_response,
    candidate_thresholds,
    exposure_value_function,
    threshold_action,
)
from .dynamics import (
    AggregatePath,
    GroupProfile,
    IntegrationError,
    TrajectoryBundle,
    batch_aggregates,
    mean_action,
    profile_from_type_actions,
    simulate,
    uniform_profile,
)
from .equilibrium import (
    ChainProfile,
    EquilibriumResult,
    GapReport,
    NcpReport,
    chain_actions,
    chain_profile,
    evaluate_gap,
    full_distribution,
    rho_to_pi,
    solve_equilibrium,
    verify_ncp,
)
from .model import (
    PlayerType,
    Scenario,
    ScenarioError,
    b_parameter,
    load_scenario,
    loads_scenario,
    serialize_scenario,
    type_boundaries,
)

__version__ = "0.1.0"
