"""Distributed optimization over directed graphs.

Push-sum consensus networks with column-stochastic mixing, the
gradient-push and Push-DIGing algorithms plus their warm-start hybrid,
and the fixed-point contraction machinery (certificates, convergence
envelopes, optimality-gap bounds) that predicts their behavior.
"""

from .algorithms import (
    GradientPushState,
    PushDigingState,
    RunRefs,
    RunTrace,
    gp_run,
    gp_step,
    hybrid_run,
    init_gp_state,
    init_pd_state,
    pd_run,
    pd_step,
    trace_to_csv,
)
from .costs import (
    CostEnsemble,
    LocalCost,
    convexity_constants,
    cost_ensemble,
    ensemble_from_dict,
    ensemble_minimizer,
    ensemble_to_dict,
    grad0_pi_norm,
    grad_stack,
    gradient,
    least_squares_cost,
    make_case1_ensemble,
    make_case2_ensemble,
    quadratic_cost,
    scale_ensemble,
)
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    resolve_config,
    run_scenario,
    tune_pd_stepsize,
)
from .linalg import (
    apply_block_operator,
    induced_pi_norm,
    kron_block,
    pi_norm,
    spectral_norm,
    symmetric_extremes,
)
from .network import (
    DirectedGraph,
    MixingNetwork,
    build_mixing_matrix,
    compute_perron,
    compute_rho,
    generate_digraph,
    is_strongly_connected,
    make_digraph,
    network_from_dict,
    network_to_dict,
)
from .operators import (
    ContractionCertificate,
    FixedPoint,
    OperatorContext,
    certify,
    consensus_gap_bound,
    contraction_constant,
    convergence_envelope,
    estimate_consensus_constants,
    gradient_push_operator,
    legacy_stepsize_threshold,
    mix_stack,
    operator_lipschitz,
    operator_matrix,
    optimality_gap_bound,
    perturbation_product,
    push_sum_perturbation,
    solve_fixed_point,
    stepsize_ceiling,
)

__version__ = "0.1.0"
