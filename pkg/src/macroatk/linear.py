"""Closed-form budgeted classifiers for linear confusion-tensor utilities.

A linear utility ``sum_j <G_j, C_j>`` is maximized over classifiers budgeted
at ``k`` by ranking labels with ``a_j * eta_j(x) + b_j`` where
``a_j = G00 + G11 - G01 - G10`` and ``b_j = G01 - G00``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .core import AffineTopK, _as_truth
from .exceptions import InvalidInputError, ParseError, ShapeError


@dataclass(frozen=True)
class PriorVector:
    """Label priors ``P(y_j = 1)``, strictly inside ``(0, 1)``."""

    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float).ravel()
        if p.size == 0 or np.any(~(p > 0)) or np.any(~(p < 1)):
            raise InvalidInputError("priors must lie strictly inside (0, 1)")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    def __len__(self):
        return self.p.size


@dataclass(frozen=True)
class StrategyId:
    tag: str
    beta: Optional[float] = None

    TAGS = ("top_k", "macro_recall", "balanced_accuracy", "power_law", "log_weight")

    def __post_init__(self):
        if self.tag not in self.TAGS:
            raise ValueError(f"unknown strategy {self.tag!r}")
        if self.tag == "power_law" and (self.beta is None or not self.beta > 0):
            raise ValueError("power_law needs beta > 0")

    @property
    def needs_priors(self):
        return self.tag != "top_k"

    def __str__(self):
        return strategy_name(self)


TOP_K = StrategyId("top_k")
MACRO_RECALL = StrategyId("macro_recall")
BALANCED_ACCURACY = StrategyId("balanced_accuracy")
POWER_LAW = StrategyId("power_law", beta=0.5)
LOG_WEIGHT = StrategyId("log_weight")

_STRATEGY_NAMES = {
    "topk": TOP_K,
    "macro-recall": MACRO_RECALL,
    "bacc": BALANCED_ACCURACY,
    "pow": POWER_LAW,
    "log": LOG_WEIGHT,
}


def parse_strategy(text):
    """Parse ``topk``, ``macro-recall``, ``bacc``, ``pow[:beta]`` or ``log``."""
    if isinstance(text, StrategyId):
        return text
    s = str(text).strip().lower()
    if s in _STRATEGY_NAMES:
        return _STRATEGY_NAMES[s]
    head, _, rest = s.partition(":")
    if head == "pow" and rest:
        try:
            return StrategyId("power_law", beta=float(rest))
        except ValueError as exc:
            raise ParseError(f"bad strategy {text!r}: {exc}") from None
    raise ParseError(f"unknown strategy {text!r}")


def strategy_name(strategy):
    if strategy.tag == "power_law":
        return f"pow:{strategy.beta:g}"
    for name, sid in _STRATEGY_NAMES.items():
        if sid == strategy:
            return name
    return strategy.tag


def gains_to_affine(G, k):
    """Affine top-k classifier maximizing the linear utility with gains ``G``."""
    G = np.asarray(G, dtype=float)
    if G.ndim != 3 or G.shape[1:] != (2, 2):
        raise ShapeError(f"gain tensor must have shape (m, 2, 2), got {G.shape}")
    a = G[:, 0, 0] + G[:, 1, 1] - G[:, 0, 1] - G[:, 1, 0]
    b = G[:, 0, 1] - G[:, 0, 0]
    return AffineTopK(a, b, k)


def closed_form_strategy(strategy, priors, k):
    """Affine classifier of a baseline strategy.

    ``priors`` is ignored by ``top_k`` and may then be an int giving ``m``.
    """
    strategy = parse_strategy(strategy)
    if strategy.tag == "top_k":
        m = priors if isinstance(priors, (int, np.integer)) else len(priors)
        return AffineTopK(np.ones(m), np.zeros(m), k)
    p = priors.p if isinstance(priors, PriorVector) else PriorVector(priors).p
    zeros = np.zeros(p.size)
    if strategy.tag == "macro_recall":
        return AffineTopK(1.0 / p, zeros, k)
    if strategy.tag == "balanced_accuracy":
        return AffineTopK(1.0 / (2 * p) + 1.0 / (2 * (1 - p)), -1.0 / (2 * (1 - p)), k)
    if strategy.tag == "power_law":
        return AffineTopK(p ** -strategy.beta, zeros, k)
    return AffineTopK(-np.log(p), zeros, k)


def estimate_priors(labels, add_count=1.0, sample_weight=None):
    """Laplace-smoothed label priors ``(count_j + c) / (n + 2c)``.

    With ``add_count=0`` labels that never (or always) occur produce priors
    of exactly 0 (or 1), which :class:`PriorVector` rejects.
    """
    y = _as_truth(labels)
    n = y.shape[0]
    if n < 1:
        raise InvalidInputError("need at least one instance to estimate priors")
    if sample_weight is None:
        counts = np.asarray(y.sum(axis=0)).ravel()
        total = float(n)
    else:
        w = np.asarray(sample_weight, dtype=float)
        counts = np.asarray(y.T @ w).ravel()
        total = float(w.sum())
    if sp.issparse(y):
        counts = counts.astype(float)
    return PriorVector((counts + add_count) / (total + 2 * add_count))
