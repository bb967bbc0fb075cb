"""Empirical entropic optimal transport and intrinsic-dimension rate experiments."""

from .covering import (
    ball_mass,
    ball_masses,
    density_l2_norm,
    density_sup,
    greedy_net,
    inverse_mass_integral,
)
from .experiments import (
    RateTable,
    bias_experiment,
    density_error_experiment,
    eps_scan_experiment,
    exact_ot_value,
    fit_loglog_slope,
    map_error_experiment,
    population_oracle,
    potential_error_experiment,
    rgg_gap_experiment,
    value_rate_experiment,
    w1_eps_ratio_experiment,
    w1_schedule_experiment,
)
from .extension import ExtendedPotentials
from .measures import (
    CostSpec,
    DiscreteMeasure,
    GeneratorSpec,
    cost_matrix,
    discretize,
    empirical_measure,
    generate,
)
from .rgg import build_rgg, dirichlet_form, lambda2, qg_diagnostic
from .sinkhorn import (
    ConvergenceError,
    DualSolution,
    dual_gradient,
    dual_objective,
    entropic_value,
    round_f,
    semi_rounded_objective,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "ExtendedPotentials",
    "build_rgg",
    "dirichlet_form",
    "lambda2",
    "qg_diagnostic",
    "ball_mass",
    "ball_masses",
    "density_l2_norm",
    "density_sup",
    "greedy_net",
    "inverse_mass_integral",
    "RateTable",
    "bias_experiment",
    "density_error_experiment",
    "eps_scan_experiment",
    "exact_ot_value",
    "fit_loglog_slope",
    "map_error_experiment",
    "population_oracle",
    "potential_error_experiment",
    "rgg_gap_experiment",
    "value_rate_experiment",
    "w1_eps_ratio_experiment",
    "w1_schedule_experiment",
    "CostSpec",
    "DiscreteMeasure",
    "GeneratorSpec",
    "cost_matrix",
    "discretize",
    "empirical_measure",
    "generate",
    "ConvergenceError",
    "DualSolution",
    "dual_gradient",
    "dual_objective",
    "entropic_value",
    "round_f",
    "semi_rounded_objective",
    "solve",
]
