"""Optimal insurance design under mean-deviation preferences.

A buyer facing a loss X ranks positions Z by g(D(Z)) + E[Z], where D is a
deviation measure (a convex signed Choquet integral such as the Gini
deviation, or the standard deviation) and g is an increasing convex penalty.
The package evaluates these functionals, prices contracts under the
expected-value, VaR, ES and distortion premium principles, solves for the
optimal indemnity in every regime (with or without a premium budget cap)
and verifies the optima against brute-force search over discretized
contracts.
"""

from .bruteforce import DiscretizedProblem, convex_order_check, discrete_objective, search_contracts
from .contracts import (
    DualTruncated,
    GridMarginal,
    Indemnity,
    StopLoss,
    ThreeThreshold,
    apply,
    ceded_deviation,
    expected_indemnity,
    objective,
    parse_indemnity,
    retained_deviation,
    retained_sd,
    serialize_indemnity,
)
from .distributions import Empirical, Exponential, LossDistribution, Pareto, Uniform
from .errors import (
    ConfigError,
    DomainError,
    InconclusiveError,
    MeanDevError,
    NumericError,
    SolverError,
    UnboundedError,
)
from .measures import (
    ChoquetDeviation,
    CustomPenalty,
    DeviationMeasure,
    Distortion,
    EndpointClass,
    LinearQuadratic,
    LogPenalty,
    PenaltyFunction,
    StandardDeviationMeasure,
    check_monotonicity_constraint,
    choquet,
    choquet_quantile_form,
    custom_distortion,
    es,
    es_deviation,
    es_premium,
    full_range,
    gini,
    inter_es_range,
    md_g,
    mean_absolute,
    standard_deviation,
    validate_distortion,
    validate_penalty,
    var,
    var_premium,
)
from .premiums import (
    DistortionPremium,
    ExpectedShortfall,
    ExpectedValue,
    PremiumPrinciple,
    ValueAtRisk,
    premium,
)
from .solvers import (
    OptimalContract,
    solve_budget_evpp,
    solve_budget_var_es,
    solve_es_premium,
    solve_evpp_choquet,
    solve_evpp_sd,
    solve_var_premium,
    sublevel_inf,
    sublevel_sup,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
