"""Binary confusion-matrix measures, their gradients and aggregations.

Every measure is evaluated labelwise on arrays ``tn, fp, fn, tp`` of shape
``(m,)``; gradients use the same ``[[tn, fp], [fn, tp]]`` layout as the
confusion tensor, so ``grad[j, u, v] == d psi_j / d C[j, u, v]``.

A smoothing constant ``eps`` is added to every denominator factor (it keeps
labels without positives or without predictions finite) and values are
clamped to ``[0, 1]`` afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import BinaryConfusion, ConfusionTensor
from .exceptions import (
    InvalidWeightsError,
    NotABinaryMeasureError,
    ParseError,
    ShapeError,
    UnsupportedMetricError,
)

DEFAULT_EPS = 1e-9

BINARY_MEASURES = (
    "accuracy",
    "precision",
    "recall",
    "balanced_accuracy",
    "f_beta",
    "g_mean",
    "jaccard",
    "auc",
)


@dataclass(frozen=True)
class SmoothingConfig:
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if not self.eps >= 0:
            raise ValueError(f"eps must be non-negative, got {self.eps}")


@dataclass(frozen=True)
class MetricId:
    """Identifier of a confusion-tensor utility.

    ``tag`` is one of :data:`BINARY_MEASURES`, ``"instance_precision_at_k"``
    or ``"mixed"``. ``beta`` parametrizes ``f_beta``; ``lam`` and ``inner``
    parametrize ``mixed``, which is ``(1 - lam) * instance precision + lam *
    macro(inner)``.
    """

    tag: str
    beta: Optional[float] = None
    lam: Optional[float] = None
    inner: Optional["MetricId"] = None

    def __post_init__(self):
        if self.tag == "f_beta":
            if self.beta is None or not self.beta > 0:
                raise ValueError("f_beta needs beta > 0")
        elif self.tag == "mixed":
            if self.lam is None or not 0.0 <= self.lam <= 1.0:
                raise ValueError("mixed needs lam in [0, 1]")
            if self.inner is None or self.inner.tag not in BINARY_MEASURES:
                raise ValueError("mixed nests a single binary (macro-averaged) measure")
        elif self.tag not in BINARY_MEASURES and self.tag != "instance_precision_at_k":
            raise UnsupportedMetricError(f"unknown metric {self.tag!r}")

    @property
    def is_binary(self):
        return self.tag in BINARY_MEASURES

    def __str__(self):
        return metric_name(self)

    # The optimizers only need these two methods; any object providing them
    # (value / gradient over an (m, 2, 2) array) can be optimized.
    def value(self, C, k=None, eps=DEFAULT_EPS):
        return macro_value(self, C, eps, k=k)

    def gradient(self, C, k=None, eps=DEFAULT_EPS):
        return macro_gradient(self, C, eps, k=k)


ACCURACY = MetricId("accuracy")
PRECISION = MetricId("precision")
RECALL = MetricId("recall")
BALANCED_ACCURACY = MetricId("balanced_accuracy")
F1 = MetricId("f_beta", beta=1.0)
G_MEAN = MetricId("g_mean")
JACCARD = MetricId("jaccard")
AUC = MetricId("auc")
INSTANCE_PRECISION = MetricId("instance_precision_at_k")

_SHORT_NAMES = {
    "accuracy": ACCURACY,
    "precision": PRECISION,
    "recall": RECALL,
    "bacc": BALANCED_ACCURACY,
    "f1": F1,
    "gmean": G_MEAN,
    "jaccard": JACCARD,
    "auc": AUC,
    "instp": INSTANCE_PRECISION,
}


def parse_metric(text):
    """Parse a CLI metric name such as ``f1``, ``fbeta:2`` or ``mixed:0.3:f1``."""
    if isinstance(text, MetricId):
        return text
    s = str(text).strip().lower()
    if s in _SHORT_NAMES:
        return _SHORT_NAMES[s]
    head, _, rest = s.partition(":")
    try:
        if head == "fbeta" and rest:
            return MetricId("f_beta", beta=float(rest))
        if head == "mixed" and rest:
            lam, _, inner = rest.partition(":")
            inner_id = parse_metric(inner)
            return MetricId("mixed", lam=float(lam), inner=inner_id)
    except (ValueError, UnsupportedMetricError) as exc:
        raise ParseError(f"bad metric {text!r}: {exc}") from None
    raise ParseError(f"unknown metric {text!r}")


def metric_name(metric):
    """Inverse of :func:`parse_metric`."""
    if metric.tag == "f_beta":
        return "f1" if metric.beta == 1.0 else f"fbeta:{metric.beta:g}"
    if metric.tag == "mixed":
        return f"mixed:{metric.lam:g}:{metric_name(metric.inner)}"
    for short, mid in _SHORT_NAMES.items():
        if mid == metric:
            return short
    return metric.tag


def _eps(s):
    if isinstance(s, SmoothingConfig):
        return s.eps
    return DEFAULT_EPS if s is None else float(s)


def _as_tensor(C):
    if isinstance(C, ConfusionTensor):
        return C.matrices, C.k
    arr = np.asarray(C, dtype=float)
    if arr.ndim != 3 or arr.shape[1:] != (2, 2):
        raise ShapeError(f"expected a (m, 2, 2) confusion tensor, got {arr.shape}")
    return arr, None


def _entries(c):
    return c[:, 0, 0], c[:, 0, 1], c[:, 1, 0], c[:, 1, 1]


# ---------------------------------------------------------------------------
# Labelwise values and gradients
# ---------------------------------------------------------------------------


def _values(metric, c, eps):
    tn, fp, fn, tp = _entries(c)
    tag = metric.tag
    if tag == "accuracy":
        v = tn + tp
    elif tag == "precision":
        v = tp / (tp + fp + eps)
    elif tag == "recall":
        v = tp / (tp + fn + eps)
    elif tag == "balanced_accuracy":
        v = tp / (2 * (tp + fn + eps)) + tn / (2 * (tn + fp + eps))
    elif tag == "f_beta":
        b2 = metric.beta ** 2
        v = (1 + b2) * tp / ((1 + b2) * tp + b2 * fn + fp + eps)
    elif tag == "g_mean":
        v = np.sqrt(np.maximum(tp * tn / ((tp + fn + eps) * (tn + fp + eps)), 0.0))
    elif tag == "jaccard":
        v = tp / (tp + fp + fn + eps)
    elif tag == "auc":
        num = 2 * tp * tn + tp * fp + fn * tn
        v = num / (2 * (tp + fn + eps) * (fp + tn + eps))
    else:
        raise NotABinaryMeasureError(f"{metric_name(metric)} is not a binary measure")
    return np.clip(v, 0.0, 1.0)


def _gradients(metric, c, eps):
    tn, fp, fn, tp = _entries(c)
    g = np.zeros_like(c, dtype=float)
    tag = metric.tag
    if tag == "accuracy":
        g[:, 0, 0] = 1.0
        g[:, 1, 1] = 1.0
    elif tag == "precision":
        d = tp + fp + eps
        g[:, 1, 1] = (fp + eps) / d**2
        g[:, 0, 1] = -tp / d**2
    elif tag == "recall":
        d = tp + fn + eps
        g[:, 1, 1] = (fn + eps) / d**2
        g[:, 1, 0] = -tp / d**2
    elif tag == "balanced_accuracy":
        d1 = tp + fn + eps
        d0 = tn + fp + eps
        g[:, 1, 1] = (fn + eps) / (2 * d1**2)
        g[:, 1, 0] = -tp / (2 * d1**2)
        g[:, 0, 0] = (fp + eps) / (2 * d0**2)
        g[:, 0, 1] = -tn / (2 * d0**2)
    elif tag == "f_beta":
        b2 = metric.beta ** 2
        d = (1 + b2) * tp + b2 * fn + fp + eps
        g[:, 1, 1] = (1 + b2) * (b2 * fn + fp + eps) / d**2
        g[:, 1, 0] = -(1 + b2) * tp * b2 / d**2
        g[:, 0, 1] = -(1 + b2) * tp / d**2
    elif tag == "g_mean":
        d1 = tp + fn + eps
        d0 = tn + fp + eps
        ratio = tp * tn / (d1 * d0)
        root = np.sqrt(np.maximum(ratio, 0.0))
        # d sqrt(r) = dr / (2 sqrt(r)); undefined at r = 0, reported as 0 there
        half_inv = np.divide(0.5, root, out=np.zeros_like(root), where=root > 0)
        g[:, 1, 1] = half_inv * tn * (fn + eps) / (d1**2 * d0)
        g[:, 1, 0] = -half_inv * tp * tn / (d1**2 * d0)
        g[:, 0, 0] = half_inv * tp * (fp + eps) / (d1 * d0**2)
        g[:, 0, 1] = -half_inv * tp * tn / (d1 * d0**2)
    elif tag == "jaccard":
        d = tp + fp + fn + eps
        g[:, 1, 1] = (fp + fn + eps) / d**2
        g[:, 0, 1] = -tp / d**2
        g[:, 1, 0] = -tp / d**2
    elif tag == "auc":
        d1 = tp + fn + eps
        d0 = fp + tn + eps
        num = 2 * tp * tn + tp * fp + fn * tn
        den = 2 * d1 * d0
        # quotient rule: (num' den - num den') / den^2
        g[:, 1, 1] = ((2 * tn + fp) * den - num * 2 * d0) / den**2
        g[:, 1, 0] = (tn * den - num * 2 * d0) / den**2
        g[:, 0, 1] = (tp * den - num * 2 * d1) / den**2
        g[:, 0, 0] = ((2 * tp + fn) * den - num * 2 * d1) / den**2
    else:
        raise NotABinaryMeasureError(f"{metric_name(metric)} is not a binary measure")
    return g


def binary_value(metric, c, s=None):
    """Value of a binary measure on one confusion matrix."""
    metric = parse_metric(metric)
    if isinstance(c, BinaryConfusion):
        c = c.as_array()
    c = np.asarray(c, dtype=float).reshape(1, 2, 2)
    return float(_values(metric, c, _eps(s))[0])


def binary_gradient(metric, c, s=None):
    """``2 x 2`` gradient of a binary measure in ``[[tn, fp], [fn, tp]]`` layout."""
    metric = parse_metric(metric)
    if isinstance(c, BinaryConfusion):
        c = c.as_array()
    c = np.asarray(c, dtype=float).reshape(1, 2, 2)
    return _gradients(metric, c, _eps(s))[0]


def labelwise_values(metric, C, s=None):
    """Per-label values of a binary measure, shape ``(m,)``."""
    c, _ = _as_tensor(C)
    return _values(parse_metric(metric), c, _eps(s))


# ---------------------------------------------------------------------------
# Aggregations
# ---------------------------------------------------------------------------


def _budget(C, k):
    c, kk = _as_tensor(C)
    if k is None:
        k = kk if kk is not None else int(round(c[:, :, 1].sum()))
    return c, k


def instance_precision(C, k=None):
    """Instance-wise precision at k, ``sum_j tp_j / k``."""
    c, k = _budget(C, k)
    return float(c[:, 1, 1].sum() / k)


def macro_value(metric, C, s=None, k=None):
    """Macro average of a binary measure, or instance precision / mixed utility.

    ``k`` defaults to the tensor's budget (or ``sum_j fp_j + tp_j`` for a raw
    array) and only matters for instance precision.
    """
    metric = parse_metric(metric)
    c, k = _budget(C, k)
    eps = _eps(s)
    if metric.tag == "instance_precision_at_k":
        return float(np.clip(c[:, 1, 1].sum() / k, 0.0, 1.0))
    if metric.tag == "mixed":
        inst = float(np.clip(c[:, 1, 1].sum() / k, 0.0, 1.0))
        return (1.0 - metric.lam) * inst + metric.lam * float(_values(metric.inner, c, eps).mean())
    return float(_values(metric, c, eps).mean())


def macro_gradient(metric, C, s=None, k=None):
    """Gain tensor ``(m, 2, 2)``: gradient of :func:`macro_value` in ``C``."""
    metric = parse_metric(metric)
    c, k = _budget(C, k)
    m = c.shape[0]
    eps = _eps(s)
    if metric.tag == "instance_precision_at_k":
        g = np.zeros_like(c, dtype=float)
        g[:, 1, 1] = 1.0 / k
        return g
    if metric.tag == "mixed":
        g = metric.lam * _gradients(metric.inner, c, eps) / m
        g[:, 1, 1] += (1.0 - metric.lam) / k
        return g
    return _gradients(metric, c, eps) / m


def micro_value(metric, C, weights=None, s=None):
    """Binary measure applied once to the weighted average of per-label matrices."""
    metric = parse_metric(metric)
    if not metric.is_binary:
        raise NotABinaryMeasureError(f"{metric_name(metric)} has no micro average")
    c, _ = _as_tensor(C)
    m = c.shape[0]
    w = np.full(m, 1.0 / m) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (m,):
        raise ShapeError(f"expected {m} weights, got shape {w.shape}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise InvalidWeightsError("micro-averaging weights must be non-negative and sum to 1")
    avg = np.tensordot(w, c, axes=1)
    return binary_value(metric, avg, s)


# ---------------------------------------------------------------------------
# Partial orders
# ---------------------------------------------------------------------------


def is_at_least_as_good(c1, c2, tol=1e-9):
    """True iff ``c1 = c2 + [[e1, -e1], [-e2, e2]]`` for some ``e1, e2 >= 0``."""
    a = c1.as_array() if isinstance(c1, BinaryConfusion) else np.asarray(c1, dtype=float)
    b = c2.as_array() if isinstance(c2, BinaryConfusion) else np.asarray(c2, dtype=float)
    d = a.reshape(2, 2) - b.reshape(2, 2)
    e1, e2 = d[0, 0], d[1, 1]
    return bool(
        e1 >= -tol and e2 >= -tol
        and abs(d[0, 1] + e1) <= tol
        and abs(d[1, 0] + e2) <= tol
    )


def tensor_at_least_as_good(C1, C2, tol=1e-9):
    """Labelwise :func:`is_at_least_as_good` for every label."""
    a, _ = _as_tensor(C1)
    b, _ = _as_tensor(C2)
    if a.shape != b.shape:
        raise ShapeError(f"tensor shapes differ: {a.shape} vs {b.shape}")
    return all(is_at_least_as_good(x, y, tol) for x, y in zip(a, b))
