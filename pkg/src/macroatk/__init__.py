"""Plug-in inference for multi-label prediction budgeted at k.

Closed-form affine top-k rules for linear confusion-tensor utilities, a
Frank-Wolfe search producing randomized classifiers for nonlinear ones,
Madow sampling of fractional predictions, and brute-force oracles.
"""

from .core import (
    AffineTopK,
    BinaryConfusion,
    ConfusionTensor,
    RandomizedClassifier,
    empirical_confusion,
    expected_confusion_randomized,
    madow_sample,
    madow_sample_many,
    madow_sample_rows,
    make_rng,
    population_confusion_discrete,
    predict_batch,
    predict_deterministic,
    predict_randomized,
    predict_randomized_batch,
    randomized_marginals,
    topk_select,
)
from .fw import FWConfig, FWTrace, fixed_schedule_step, line_search, run_frank_wolfe, split_dataset
from .linear import PriorVector, StrategyId, closed_form_strategy, estimate_priors, gains_to_affine
from .metrics import (
    MetricId,
    SmoothingConfig,
    binary_gradient,
    binary_value,
    is_at_least_as_good,
    macro_gradient,
    macro_value,
    micro_value,
    parse_metric,
    tensor_at_least_as_good,
)
from .oracle import (
    DiscreteDistribution,
    best_deterministic,
    best_randomized_vertex_fw,
    coupling_witness,
    enumerate_assignments,
    random_discrete_distribution,
)

__version__ = "0.1.0"

__all__ = [
    "AffineTopK",
    "best_deterministic",
    "best_randomized_vertex_fw",
    "binary_gradient",
    "binary_value",
    "BinaryConfusion",
    "closed_form_strategy",
    "ConfusionTensor",
    "coupling_witness",
    "DiscreteDistribution",
    "empirical_confusion",
    "enumerate_assignments",
    "estimate_priors",
    "expected_confusion_randomized",
    "fixed_schedule_step",
    "FrankWolfeClassifier",
    "FWConfig",
    "FWTrace",
    "gains_to_affine",
    "is_at_least_as_good",
    "line_search",
    "macro_gradient",
    "macro_value",
    "madow_sample",
    "madow_sample_many",
    "madow_sample_rows",
    "make_rng",
    "MetricId",
    "micro_value",
    "parse_metric",
    "PluginTopKClassifier",
    "population_confusion_discrete",
    "predict_batch",
    "predict_deterministic",
    "predict_randomized",
    "predict_randomized_batch",
    "PriorVector",
    "random_discrete_distribution",
    "randomized_marginals",
    "RandomizedClassifier",
    "run_frank_wolfe",
    "SmoothingConfig",
    "split_dataset",
    "StrategyId",
    "tensor_at_least_as_good",
    "topk_select",
]

_ESTIMATORS = ("FrankWolfeClassifier", "PluginTopKClassifier")


def __getattr__(name):
    # the estimators pull in scikit-learn; import them only when asked for
    if name in _ESTIMATORS:
        from . import estimators

        return getattr(estimators, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
