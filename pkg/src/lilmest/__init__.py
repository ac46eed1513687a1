"""Anytime iterated-logarithm confidence sequences for M-estimators,
the robust best-arm-identification bandit built on them, and the Monte
Carlo harness that checks both."""

from .bounds import (
    BoundarySpec,
    CurvatureEntryError,
    LilParams,
    confidence_to_delta,
    lil_radius,
    matched_delta,
    smallest_valid_n,
    sum_boundary,
    union_bound_radius,
    zeta,
)
from .mestimators import LocationMEstimator, LossSpec, SampleSet, brute_force_fit, empirical_risk, fit
from .rewards import ProblemInstance, RewardModel, alpha_model_means, gaps_and_complexity, sample, sample_block
from .bandit import (
    BanditConfig,
    BanditNoStopError,
    BanditRun,
    run_bandit,
    run_mest_lilucb,
    run_vanilla_lilucb,
    stopping_check,
    theoretical_lambda,
    ucb_index,
    vanilla_index,
)
from .multivariate import (
    LabeledData,
    MultivariateSpec,
    PenalizedMEstimator,
    SolverError,
    fit_penalized,
    population_minimizer_oracle,
    directional_radius,
)
from .experiments import (
    ExperimentConfig,
    run_bai_experiment,
    run_bound_comparison,
    run_coverage_1d,
    run_coverage_multivariate,
)

__version__ = "0.1.0"
