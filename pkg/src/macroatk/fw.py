"""Frank-Wolfe search over confusion tensors of budgeted classifiers.

Each iteration linearizes the utility at the current confusion tensor, solves
the linear problem exactly with an affine top-k rule, and moves towards the
confusion tensor of that rule. The result is a mixture of affine top-k
classifiers whose confusion tensor is the mixture of the component tensors.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .core import (
    AffineTopK,
    RandomizedClassifier,
    _as_marginals,
    _as_truth,
    check_budget,
    empirical_confusion,
    make_rng,
    predict_batch,
)
from .exceptions import InvalidInputError, InvalidSplitError, ShapeError, UnsupportedMetricError
from .linear import gains_to_affine
from .metrics import DEFAULT_EPS, parse_metric

logger = logging.getLogger(__name__)

GRID_POINTS = 33
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class FWConfig:
    max_iters: int = 100
    stop_eps: float = 0.001
    init: str = "topk"
    step_rule: str = "line_search"
    line_search_iters: int = 60
    seed: int = 0
    metric_eps: float = DEFAULT_EPS

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.stop_eps >= 0:
            raise ValueError("stop_eps must be >= 0")
        if self.init not in ("topk", "random"):
            raise ValueError(f"init must be 'topk' or 'random', got {self.init!r}")
        if self.step_rule not in ("line_search", "fixed"):
            raise ValueError(f"step_rule must be 'line_search' or 'fixed', got {self.step_rule!r}")
        if self.line_search_iters < 1:
            raise ValueError("line_search_iters must be >= 1")


@dataclass
class FWTrace:
    """Objective and step size of every accepted iterate (iteration 0 is the start)."""

    iterations: List[int] = field(default_factory=list)
    objectives: List[float] = field(default_factory=list)
    steps: List[float] = field(default_factory=list)
    stopped_early: bool = False

    def append(self, iteration, objective, step):
        self.iterations.append(int(iteration))
        self.objectives.append(float(objective))
        self.steps.append(float(step))

    def __len__(self):
        return len(self.iterations)

    def rows(self):
        return list(zip(self.iterations, self.objectives, self.steps))

    def is_monotone(self, tol=0.0):
        obj = np.asarray(self.objectives)
        return bool(np.all(np.diff(obj) >= -tol))


def fixed_schedule_step(i):
    """Classical Frank-Wolfe step ``2 / (i + 1)`` for iteration ``i >= 1``."""
    if i < 1:
        raise ValueError("iteration index must be >= 1")
    return 2.0 / (i + 1)


def _segment_objective(metric, C, Cp, k, eps):
    c0 = np.asarray(getattr(C, "matrices", C), dtype=float)
    c1 = np.asarray(getattr(Cp, "matrices", Cp), dtype=float)
    if c0.shape != c1.shape:
        raise ShapeError("confusion tensors must share their shape")
    if k is None:
        k = getattr(C, "k", None)

    def f(alpha):
        return metric.value((1.0 - alpha) * c0 + alpha * c1, k=k, eps=eps)

    return f


def maximize_on_interval(f, iters=60, grid_points=GRID_POINTS):
    """Maximize a scalar function on ``[0, 1]``.

    A uniform grid picks the bracket around the best grid point, which is then
    refined by golden-section search. The best of all evaluated points wins;
    exact ties go to the smaller argument, so a flat function returns 0.
    """
    grid = np.linspace(0.0, 1.0, grid_points)
    vals = [f(x) for x in grid]
    best = int(np.argmax(vals))
    cand_x = list(grid)
    cand_v = list(vals)
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid_points - 1)]
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = f(x2)
    cand_x += [x1, x2]
    cand_v += [f1, f2]
    order = sorted(range(len(cand_x)), key=lambda i: (-cand_v[i], cand_x[i]))
    return float(cand_x[order[0]])


def line_search(metric, C, Cp, iters=60, k=None, eps=DEFAULT_EPS):
    """Step ``alpha`` in ``[0, 1]`` maximizing ``psi((1 - alpha) C + alpha Cp)``."""
    metric = _resolve_metric(metric)
    return maximize_on_interval(_segment_objective(metric, C, Cp, k, eps), iters)


def _resolve_metric(metric):
    if isinstance(metric, str):
        metric = parse_metric(metric)
    if not (hasattr(metric, "value") and hasattr(metric, "gradient")):
        raise UnsupportedMetricError(f"{metric!r} does not provide value and gradient")
    return metric


def empirical_provider(marginals, labels, sample_weight=None):
    """Return ``clf -> confusion array`` on a fixed evaluation set.

    With soft ``labels`` (the true marginals) and the support weights of a
    discrete distribution this yields exact population confusion tensors.
    """
    x = _as_marginals(marginals)
    y = _as_truth(labels)
    if x.shape != y.shape:
        raise ShapeError(f"marginals {x.shape} and labels {y.shape} differ in shape")

    def provider(clf):
        return empirical_confusion(predict_batch(clf, x), y, sample_weight).matrices

    return provider


def initial_classifier(cfg: FWConfig, m, k):
    if cfg.init == "topk":
        return AffineTopK(np.ones(m), np.zeros(m), k)
    rng = make_rng(cfg.seed)
    return AffineTopK(rng.uniform(0.5, 1.5, size=m), np.zeros(m), k)


def frank_wolfe(metric, provider: Callable, m, k, cfg: Optional[FWConfig] = None):
    """Frank-Wolfe over a generic confusion provider ``clf -> (m, 2, 2) array``.

    Returns ``(RandomizedClassifier, FWTrace, final confusion array)``.
    """
    cfg = cfg or FWConfig()
    metric = _resolve_metric(metric)
    k = check_budget(k, m)
    eps = cfg.metric_eps

    def psi(c):
        return metric.value(c, k=k, eps=eps)

    comps = [initial_classifier(cfg, m, k)]
    weights = [1.0]
    C = provider(comps[0])
    trace = FWTrace()
    trace.append(0, psi(C), 1.0)
    for i in range(1, cfg.max_iters + 1):
        G = np.asarray(metric.gradient(C, k=k, eps=eps), dtype=float)
        if not np.all(np.isfinite(G)):
            raise InvalidInputError(f"non-finite gradient at iteration {i}")
        h = gains_to_affine(G, k)
        Cp = provider(h)
        if cfg.step_rule == "line_search":
            alpha = maximize_on_interval(lambda a: psi((1.0 - a) * C + a * Cp),
                                         cfg.line_search_iters)
        else:
            alpha = fixed_schedule_step(i)
        if alpha < cfg.stop_eps:
            trace.stopped_early = True
            logger.debug("stopping at iteration %d: step %.3g < %.3g", i, alpha, cfg.stop_eps)
            break
        C = (1.0 - alpha) * C + alpha * Cp
        weights = [w * (1.0 - alpha) for w in weights] + [alpha]
        comps.append(h)
        trace.append(i, psi(C), alpha)
    w = np.asarray(weights)
    return RandomizedClassifier(tuple(comps), w / w.sum()), trace, C


def run_frank_wolfe(metric, marginals, labels, k, cfg: Optional[FWConfig] = None,
                    sample_weight=None):
    """Optimize ``metric`` on ``(marginals, labels)``; returns ``(classifier, trace)``."""
    x = _as_marginals(marginals)
    if x.shape[0] == 0 or x.shape[1] == 0:
        raise InvalidInputError("empty data")
    provider = empirical_provider(x, labels, sample_weight)
    rclf, trace, _ = frank_wolfe(metric, provider, x.shape[1], k, cfg)
    return rclf, trace


_RATIOS = {"50/50": 0.5, "75/25": 0.75, "100/100": None}


def _ratio_fraction(ratio):
    key = str(ratio).strip()
    key = {"50": "50/50", "75": "75/25", "100": "100/100"}.get(key, key)
    if key not in _RATIOS:
        raise InvalidSplitError(f"unknown split ratio {ratio!r}")
    return _RATIOS[key]


def split_dataset(labels, marginals, ratio="50/50", seed=0):
    """Randomly split instances into ``(labels1, marginals1), (labels2, marginals2)``.

    The first part is meant for fitting label-probability estimators and the
    second for tuning the classifier; ``100/100`` returns the full set twice.
    """
    frac = _ratio_fraction(ratio)
    n = labels.shape[0]
    if marginals.shape[0] != n:
        raise ShapeError("labels and marginals have a different number of rows")
    if frac is None:
        if n == 0:
            raise InvalidSplitError("cannot split an empty dataset")
        return (labels, marginals), (labels, marginals)
    perm = make_rng(seed).permutation(n)
    n1 = int(round(frac * n))
    if n1 == 0 or n1 == n:
        raise InvalidSplitError(f"split {ratio} of {n} instances leaves a part empty")
    first, second = np.sort(perm[:n1]), np.sort(perm[n1:])
    return (labels[first], marginals[first]), (labels[second], marginals[second])
