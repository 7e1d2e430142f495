"""Latency-constrained layer-wise sparsity profile optimization.

Given per-layer timings on a sparsity grid and per-layer error scores, the
solver picks the profile minimizing total error subject to a time budget.
On top of it sit error-model constructors, a coefficient search driven by a
black-box profile evaluator, baseline profile generators, and synthetic
instance generators for benchmarking.
"""

from .baselines import gmp_profile, uniform_profile
from .core import (
    DiscreteTimings,
    Profile,
    SkipList,
    SparsityGrid,
    TimeBudget,
    TimingTable,
    discretize,
    load_timing_table,
    make_grid,
    parse_skip_spec,
    profile_time,
    save_timing_table,
    time_budget,
)
from .dp import DpSolution, ErrorTable, brute_force, dp_tables, solve_dp
from .error_models import (
    LayerWeightStats,
    SensitivityVector,
    abs_quantile_table,
    custom_norm_errors,
    layerwise_loss_errors,
    load_error_table,
    load_sensitivity,
    load_weight_stats,
    quadratic_errors,
    save_weight_stats,
    squared_weight_errors,
)
from .evaluators import EvalCache, Evaluator, ExternalEvaluator, spawn_external
from .exceptions import (
    EnumerationCapError,
    EvaluationError,
    InfeasibleError,
    MalformedInputError,
    ValidationError,
)
from .rng import SplitMix64
from .search import (
    GaParams,
    SearchParams,
    SearchTrace,
    direct_search,
    genetic_search,
    nominal_evaluations,
    spdy_search,
)
from .testbed import (
    SyntheticLossSpec,
    SyntheticTimingSpec,
    additive_error_table,
    additive_loss,
    coupled_loss,
    gen_timings,
    half_normal_quantiles,
    load_loss_spec,
    random_loss_spec,
    random_timing_spec,
    random_weight_stats,
    save_loss_spec,
)

__version__ = "0.1.0"

__all__ = [
    "DiscreteTimings", "Profile", "SkipList", "SparsityGrid", "TimeBudget",
    "TimingTable", "discretize", "load_timing_table", "make_grid",
    "parse_skip_spec", "profile_time", "save_timing_table", "time_budget",
    "DpSolution", "ErrorTable", "brute_force", "dp_tables", "solve_dp",
    "LayerWeightStats", "SensitivityVector", "abs_quantile_table",
    "custom_norm_errors", "layerwise_loss_errors", "load_error_table",
    "load_sensitivity", "load_weight_stats", "quadratic_errors",
    "save_weight_stats", "squared_weight_errors",
    "EvalCache", "Evaluator", "ExternalEvaluator", "spawn_external",
    "EnumerationCapError", "EvaluationError", "InfeasibleError",
    "MalformedInputError", "ValidationError",
    "SplitMix64",
    "GaParams", "SearchParams", "SearchTrace", "direct_search",
    "genetic_search", "nominal_evaluations", "spdy_search",
    "SyntheticLossSpec", "SyntheticTimingSpec", "additive_error_table",
    "additive_loss", "coupled_loss", "gen_timings", "half_normal_quantiles",
    "load_loss_spec", "random_loss_spec", "random_timing_spec",
    "random_weight_stats", "save_loss_spec",
    "__version__",
]
