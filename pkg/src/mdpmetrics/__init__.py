"""Bisimulation metrics, exact optimal transport, and metric-guided state
aggregation for finite Markov decision processes."""

__version__ = "0.1.0"

from .mdp import (
    FiniteMdp,
    check_value_vector,
    greedy_policy,
    normalize_rows,
    require_valid_mdp,
    reward_span,
    validate_mdp,
    value_bounds,
    value_iteration,
)
from .partition import Partition
from .transport import (
    DEFAULT_TOLERANCES,
    Tolerances,
    TransportResult,
    brute_force_kantorovich,
    check_cost_matrix,
    check_distribution,
    kantorovich,
    kantorovich_value,
    quotient_total_variation,
    total_variation,
)
from .bisim import (
    FixedPointResult,
    KernelReport,
    bisimulation_partition,
    check_metric_matrix,
    fixed_point_metric,
    kernel_check,
    metric_bound,
    metric_step,
    perturbation_bound,
    value_lipschitz_check,
)
from .aggregation import (
    AggregationReport,
    aggregation_report,
    epsilon_partition,
    quotient_mdp,
)
from .toy import (
    ConvergenceRow,
    ToySpec,
    convergence_experiment,
    toy_centers,
    toy_mdp,
    toy_metric_closed_form,
    toy_value_closed_form,
    toy_value_mean,
    toy_value_switch_point,
)

__all__ = [
    "FiniteMdp",
    "validate_mdp",
    "require_valid_mdp",
    "normalize_rows",
    "reward_span",
    "value_iteration",
    "greedy_policy",
    "value_bounds",
    "check_value_vector",
    "Partition",
    "Tolerances",
    "DEFAULT_TOLERANCES",
    "TransportResult",
    "check_distribution",
    "check_cost_matrix",
    "kantorovich",
    "kantorovich_value",
    "brute_force_kantorovich",
    "total_variation",
    "quotient_total_variation",
    "check_metric_matrix",
    "metric_bound",
    "metric_step",
    "FixedPointResult",
    "fixed_point_metric",
    "bisimulation_partition",
    "KernelReport",
    "kernel_check",
    "perturbation_bound",
    "value_lipschitz_check",
    "AggregationReport",
    "epsilon_partition",
    "quotient_mdp",
    "aggregation_report",
    "ToySpec",
    "toy_mdp",
    "toy_centers",
    "toy_metric_closed_form",
    "toy_value_switch_point",
    "toy_value_mean",
    "toy_value_closed_form",
    "ConvergenceRow",
    "convergence_experiment",
]
