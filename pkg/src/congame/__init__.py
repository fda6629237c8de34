"""Offline equilibrium learning for congestion games.

The package covers the full pipeline: describe a congestion game, collect an
offline dataset under an exploration policy at one of three feedback levels
(per-facility rewards, per-player totals, or the grand total), fit the
level-appropriate estimator with confidence widths, search for an approximate
Nash equilibrium by surrogate-gap minimization, and audit whether the
exploration covered enough of the game for any of that to be meaningful.
"""

from .coverage import (
    CoverageReport,
    covariance_domination_coefficient,
    facility_density,
    facility_unilateral_coefficient,
    one_unit_deviation_check,
    one_unit_deviation_policy,
    population_covariance_coefficient,
    uniform_configuration_policy,
    unilateral_coefficient,
)
from .data import (
    Dataset,
    ExplorationPolicy,
    FeedbackLevel,
    collect,
    expected_records,
    load,
    project,
    save,
)
from .errors import (
    CongameError,
    CoverageInfeasibleError,
    FormatError,
    InputError,
    ResourceLimitError,
)
from .estimators import (
    FacilityEstimate,
    FeatureMap,
    LinearModel,
    default_iota,
    fit,
    fit_agent_ridge,
    fit_facility,
    fit_game_ridge,
)
from .game import (
    ActionSet,
    CongestionGame,
    JointAction,
    ProductPolicy,
    best_response_value,
    enumerate_pure_ne,
    full_action_space,
    gap,
    noisy_variant,
    policy_value,
    potential,
    pure_gap,
    sample_rewards,
)
from .instances import (
    NamedInstance,
    build,
    minimax_gap,
    separation_check,
    sufficient_statistics,
)
from .solver import (
    SurrogateCertificate,
    optimistic_best_response,
    optimistic_pessimistic_values,
    surrogate_gap,
    surrogate_minimize,
)
from .sweep import (
    SweepSpec,
    emit_csv,
    emit_plot,
    run_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "ActionSet",
    "CongameError",
    "CongestionGame",
    "CoverageInfeasibleError",
    "CoverageReport",
    "Dataset",
    "ExplorationPolicy",
    "FacilityEstimate",
    "FeatureMap",
    "FeedbackLevel",
    "FormatError",
    "InputError",
    "JointAction",
    "LinearModel",
    "NamedInstance",
    "ProductPolicy",
    "ResourceLimitError",
    "SurrogateCertificate",
    "SweepSpec",
    "best_response_value",
    "build",
    "collect",
    "covariance_domination_coefficient",
    "default_iota",
    "emit_csv",
    "emit_plot",
    "enumerate_pure_ne",
    "expected_records",
    "facility_density",
    "facility_unilateral_coefficient",
    "fit",
    "fit_agent_ridge",
    "fit_facility",
    "fit_game_ridge",
    "full_action_space",
    "gap",
    "load",
    "minimax_gap",
    "noisy_variant",
    "one_unit_deviation_check",
    "one_unit_deviation_policy",
    "optimistic_best_response",
    "optimistic_pessimistic_values",
    "policy_value",
    "population_covariance_coefficient",
    "potential",
    "project",
    "pure_gap",
    "run_sweep",
    "sample_rewards",
    "save",
    "separation_check",
    "sufficient_statistics",
    "surrogate_gap",
    "surrogate_minimize",
    "uniform_configuration_policy",
    "unilateral_coefficient",
]
