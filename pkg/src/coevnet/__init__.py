"""Networks and memberships that shape each other over time.

Nodes carry mixed role memberships on a simplex; links form by role
compatibility; memberships then drift toward weighted neighbors. The
package simulates that loop forward and inverts it with variational EM,
recovering membership trajectories, the role-compatibility matrix, and
per-node influence parameters from observed snapshots alone.
"""

from .core import (
    DynamicNetwork,
    EmptyNeighborhoodError,
    MembershipState,
    ModelParams,
    NumericalError,
    RoleIndicators,
    influence_mean,
    marginal_link_prob,
    neighborhood_mean,
    normalized_weights,
    softmax_from_natural,
    transition_log_density,
)
from .elbo import (
    VariationalState,
    elbo,
    elbo_grad_gamma,
    elbo_grad_influence,
    zeta_optimum,
)
from .em import (
    FitConfig,
    FitReport,
    align_roles,
    apply_role_alignment,
    fit,
    run_chain,
    spectral_init,
    static_baseline_fit,
)
from .estep import (
    EStepConfig,
    EStepResult,
    run_estep,
    solve_sigma,
    update_gamma,
    update_phi_pair,
    update_zeta,
)
from .generator import (
    GenConfig,
    GroundTruth,
    benchmark_config,
    benchmark_params,
    generate_sequence,
    hub_config,
    sample_initial_state,
    sample_snapshot,
    step_memberships,
    two_bloc_config,
)
from .io import (
    EdgeEvent,
    SponsorshipRecord,
    build_cosponsorship_network,
    load_edge_sequence,
    load_fit_report,
    load_ground_truth,
    load_scores_csv,
    load_sponsorship_records,
    save_edge_sequence,
    save_fit_report,
    save_ground_truth,
    save_metrics_csv,
)
from .mstep import (
    MStepConfig,
    update_B,
    update_eta,
    update_influence,
    update_prior,
)
from .metrics import (
    CorrelationReport,
    InfluenceReport,
    ScoreSeries,
    influence_ranking,
    polarization_series,
    score_correlation,
    trajectory_l2_error,
)
from .cli import cli_main

__version__ = "0.1.0"

__all__ = [
    "DynamicNetwork",
    "EmptyNeighborhoodError",
    "MembershipState",
    "ModelParams",
    "NumericalError",
    "RoleIndicators",
    "influence_mean",
    "marginal_link_prob",
    "neighborhood_mean",
    "normalized_weights",
    "softmax_from_natural",
    "transition_log_density",
    "VariationalState",
    "elbo",
    "elbo_grad_gamma",
    "elbo_grad_influence",
    "zeta_optimum",
    "FitConfig",
    "FitReport",
    "align_roles",
    "apply_role_alignment",
    "fit",
    "run_chain",
    "spectral_init",
    "static_baseline_fit",
    "EStepConfig",
    "EStepResult",
    "run_estep",
    "solve_sigma",
    "update_gamma",
    "update_phi_pair",
    "update_zeta",
    "GenConfig",
    "GroundTruth",
    "benchmark_config",
    "benchmark_params",
    "generate_sequence",
    "hub_config",
    "sample_initial_state",
    "sample_snapshot",
    "step_memberships",
    "two_bloc_config",
    "EdgeEvent",
    "SponsorshipRecord",
    "build_cosponsorship_network",
    "load_edge_sequence",
    "load_fit_report",
    "load_ground_truth",
    "load_scores_csv",
    "load_sponsorship_records",
    "save_edge_sequence",
    "save_fit_report",
    "save_ground_truth",
    "save_metrics_csv",
    "MStepConfig",
    "update_B",
    "update_eta",
    "update_influence",
    "update_prior",
    "CorrelationReport",
    "InfluenceReport",
    "ScoreSeries",
    "influence_ranking",
    "polarization_series",
    "score_correlation",
    "trajectory_l2_error",
    "cli_main",
    "__version__",
]
