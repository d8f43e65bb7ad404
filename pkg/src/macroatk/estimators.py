"""scikit-learn style wrappers around the plug-in inference routines.

The "features" ``X`` of these estimators are estimated label marginals
``eta(x)`` (dense or CSR, ``n x m``); ``Y`` is the binary label matrix. Both
estimators predict CSR matrices with exactly ``k`` ones per row.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import core
from ._validation import check_labels, check_marginals
from .evaluation import score_predictions
from .fw import FWConfig, run_frank_wolfe, split_dataset
from .linear import closed_form_strategy, estimate_priors, parse_strategy
from .metrics import parse_metric


class PluginTopKClassifier(BaseEstimator):
    """Closed-form affine top-k classifier for a baseline strategy.

    Parameters
    ----------
    k : int
        Number of labels predicted for every instance.
    strategy : str
        ``topk``, ``macro-recall``, ``bacc``, ``pow`` / ``pow:<beta>`` or ``log``.
    prior_smoothing : float
        Pseudo-count used when estimating label priors in :meth:`fit`.

    Attributes
    ----------
    priors_ : PriorVector or None
    classifier_ : AffineTopK
    n_labels_ : int
    """

    def __init__(self, k=5, strategy="topk", prior_smoothing=1.0):
        self.k = k
        self.strategy = strategy
        self.prior_smoothing = prior_smoothing

    def fit(self, X, Y=None):
        X = check_marginals(X)
        strategy = parse_strategy(self.strategy)
        m = X.shape[1]
        if strategy.needs_priors:
            if Y is None:
                raise ValueError(f"strategy {self.strategy!r} needs labels to estimate priors")
            Y = check_labels(Y, shape=X.shape)
            self.priors_ = estimate_priors(Y, add_count=self.prior_smoothing)
            self.classifier_ = closed_form_strategy(strategy, self.priors_, self.k)
        else:
            self.priors_ = None
            self.classifier_ = closed_form_strategy(strategy, m, self.k)
        self.n_labels_ = m
        return self

    def decision_function(self, X):
        check_is_fitted(self, "classifier_")
        X = check_marginals(X, self.n_labels_)
        return self.classifier_.decision_function(X)

    def predict(self, X):
        check_is_fitted(self, "classifier_")
        return core.predict_batch(self.classifier_, check_marginals(X, self.n_labels_))

    def score(self, X, Y, metric="instp"):
        return score_predictions(self.predict(X), check_labels(Y), (metric,))[metric]


class FrankWolfeClassifier(BaseEstimator):
    """Randomized budgeted classifier optimizing a confusion-tensor utility.

    Parameters
    ----------
    metric : str or MetricId
        Utility to maximize, e.g. ``f1``, ``jaccard``, ``mixed:0.5:f1``.
    k : int
    max_iter : int
    tol : float
        Stop when the chosen step size drops below ``tol``.
    init : {"topk", "random"}
    step : {"line_search", "fixed"}
    line_search_iter : int
    split : {"50/50", "75/25", "100/100"}
        Part of the training data used to estimate confusion tensors. With
        a proper split, the first part is ignored here (it is where the
        marginal estimator would have been fitted).
    metric_eps : float
        Denominator smoothing of the metric.
    random_state : int
        Seeds the random initialization, the split and default sampling.
    soft_labels : bool
        Treat ``Y`` as label marginals (exact population confusion tensors).

    Attributes
    ----------
    classifier_ : RandomizedClassifier
    trace_ : FWTrace
    n_labels_ : int
    """

    def __init__(self, metric="f1", k=5, max_iter=100, tol=0.001, init="topk",
                 step="line_search", line_search_iter=60, split="100/100",
                 metric_eps=1e-9, random_state=0, soft_labels=False):
        self.metric = metric
        self.k = k
        self.max_iter = max_iter
        self.tol = tol
        self.init = init
        self.step = step
        self.line_search_iter = line_search_iter
        self.split = split
        self.metric_eps = metric_eps
        self.random_state = random_state
        self.soft_labels = soft_labels

    def _config(self):
        return FWConfig(max_iters=self.max_iter, stop_eps=self.tol, init=self.init,
                        step_rule=self.step, line_search_iters=self.line_search_iter,
                        seed=self.random_state, metric_eps=self.metric_eps)

    def fit(self, X, Y, sample_weight=None):
        X = check_marginals(X)
        Y = check_labels(Y, shape=X.shape, soft=self.soft_labels)
        if str(self.split) not in ("100", "100/100"):
            if sample_weight is not None:
                raise ValueError("sample_weight is only supported with split='100/100'")
            _, (Y, X) = split_dataset(Y, X, self.split, seed=self.random_state)
        self.classifier_, self.trace_ = run_frank_wolfe(self.metric, X, Y, self.k,
                                                        self._config(), sample_weight)
        self.n_labels_ = X.shape[1]
        return self

    def predict(self, X, random_state=None):
        """Sample one mixture component per instance."""
        check_is_fitted(self, "classifier_")
        rng = core.make_rng(self.random_state if random_state is None else random_state)
        return core.predict_randomized_batch(self.classifier_, check_marginals(X, self.n_labels_), rng)

    def predict_marginals(self, X):
        """Fractional predictions ``sum_i alpha_i h_i(x)``; rows sum to ``k``."""
        check_is_fitted(self, "classifier_")
        return core.randomized_marginals(self.classifier_, check_marginals(X, self.n_labels_))

    def predict_madow(self, X, random_state=None):
        """Realize :meth:`predict_marginals` row by row with Madow sampling."""
        rng = core.make_rng(self.random_state if random_state is None else random_state)
        return core.madow_sample_rows(self.predict_marginals(X), rng, k=self.k)

    def expected_confusion(self, X, Y, sample_weight=None):
        check_is_fitted(self, "classifier_")
        X = check_marginals(X, self.n_labels_)
        Y = check_labels(Y, shape=X.shape, soft=self.soft_labels)
        return core.expected_confusion_randomized(self.classifier_, X, Y, sample_weight)

    def score(self, X, Y, sample_weight=None):
        """Utility of the expected confusion tensor on ``(X, Y)``."""
        C = self.expected_confusion(X, Y, sample_weight)
        metric = parse_metric(self.metric) if isinstance(self.metric, str) else self.metric
        return float(metric.value(C.matrices, k=self.k, eps=self.metric_eps))
