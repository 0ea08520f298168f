"""Finite-horizon risk-averse Markov decision process toolkit.

Solves the exponential-utility control objective by backward induction,
evaluates fixed policies exactly or by seeded Monte Carlo, and certifies
optimality against brute-force policy enumeration on small instances.
"""

from .model import (
    FiniteModel,
    MarkovPolicy,
    ModelValidationError,
    Trajectory,
    TransitionKernel,
    ValidationReport,
    check_policy,
    cost_to_go,
    ensure_valid,
    load_model,
    model_from_dict,
    model_to_dict,
    pushforward,
    save_model,
    trajectory_cost,
    validate_model,
)
from .risk import (
    CostDistribution,
    RiskParam,
    entropic_risk,
    expectation,
    log_expected_exp,
    mean_variance_approx,
)
from .solver import (
    SolveResult,
    SweepPoint,
    ValueTables,
    solve_exputil,
    solve_risk_neutral,
    theta_sweep,
)
from .evaluator import (
    CapExceededError,
    TrajectoryDistribution,
    WTables,
    cost_law,
    evaluate_policy,
    monte_carlo_risk,
    reachable_sets,
    simulate,
    trajectory_distribution,
    w_tables,
)
from .oracle import (
    BruteForceResult,
    Certificate,
    HistoryPolicy,
    brute_force_history,
    brute_force_markov,
    certify,
)
from .discretizer import (
    Affine1DSpec,
    GridSpec,
    discretize,
    load_affine_spec,
    quantize_gaussian,
    standard_normal_quantile,
)

__version__ = "0.1.0"

__all__ = [
    "Affine1DSpec",
    "BruteForceResult",
    "CapExceededError",
    "Certificate",
    "CostDistribution",
    "FiniteModel",
    "GridSpec",
    "HistoryPolicy",
    "MarkovPolicy",
    "ModelValidationError",
    "RiskParam",
    "SolveResult",
    "SweepPoint",
    "Trajectory",
    "TrajectoryDistribution",
    "TransitionKernel",
    "ValidationReport",
    "ValueTables",
    "WTables",
    "brute_force_history",
    "brute_force_markov",
    "certify",
    "check_policy",
    "cost_law",
    "cost_to_go",
    "discretize",
    "ensure_valid",
    "entropic_risk",
    "evaluate_policy",
    "expectation",
    "load_affine_spec",
    "load_model",
    "log_expected_exp",
    "mean_variance_approx",
    "model_from_dict",
    "model_to_dict",
    "monte_carlo_risk",
    "pushforward",
    "quantize_gaussian",
    "reachable_sets",
    "save_model",
    "simulate",
    "solve_exputil",
    "solve_risk_neutral",
    "standard_normal_quantile",
    "theta_sweep",
    "trajectory_cost",
    "trajectory_distribution",
    "validate_model",
    "w_tables",
]
