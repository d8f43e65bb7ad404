"""Scoring of k-hot prediction matrices against binary labels."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .core import empirical_confusion
from .metrics import (
    F1,
    PRECISION,
    RECALL,
    instance_precision,
    macro_value,
    parse_metric,
)

DEFAULT_METRICS = ("instp", "instr", "macro-precision", "macro-recall", "macro-f1")

_MACRO_ALIASES = {"macro-precision": PRECISION, "macro-recall": RECALL, "macro-f1": F1}


def instance_recall(predictions, labels):
    """Mean over instances with at least one label of ``|pred & y| / |y|``.

    Instances without relevant labels are skipped; returns 0.0 when every
    instance is empty.
    """
    h = sp.csr_matrix(predictions)
    y = sp.csr_matrix(labels)
    hits = np.asarray(h.multiply(y).sum(axis=1)).ravel()
    pos = np.asarray(y.sum(axis=1)).ravel()
    keep = pos > 0
    if not keep.any():
        return 0.0
    return float(np.mean(hits[keep] / pos[keep]))


def score_predictions(predictions, labels, metrics=DEFAULT_METRICS, eps=None):
    """``{metric name: value}`` for hard predictions.

    Names are ``instp``, ``instr``, ``macro-precision``, ``macro-recall``,
    ``macro-f1`` or any metric string understood by
    :func:`~macroatk.metrics.parse_metric` (evaluated as a macro average).
    """
    C = empirical_confusion(predictions, labels)
    out = {}
    for name in metrics:
        if name == "instp":
            out[name] = instance_precision(C)
        elif name == "instr":
            out[name] = instance_recall(predictions, labels)
        elif name in _MACRO_ALIASES:
            out[name] = macro_value(_MACRO_ALIASES[name], C, eps)
        else:
            out[name] = macro_value(parse_metric(name), C, eps)
    return out


def metric_label(name, k):
    """Report column label, e.g. ``macro-f1@5``."""
    return f"{name}@{k}"


def audit_scores(pred_rows, label_rows, m, k):
    """Independent recomputation of the default metrics from index lists.

    Deliberately avoids the confusion-tensor code path: it counts set
    intersections instance by instance.
    """
    n = len(pred_rows)
    tp = [0] * m
    npred = [0] * m
    npos = [0] * m
    inst_p = 0.0
    inst_r, n_r = 0.0, 0
    for pred, gold in zip(pred_rows, label_rows):
        pred, gold = set(pred), set(gold)
        hit = pred & gold
        inst_p += len(hit) / k
        if gold:
            inst_r += len(hit) / len(gold)
            n_r += 1
        for j in pred:
            npred[j] += 1
        for j in gold:
            npos[j] += 1
        for j in hit:
            tp[j] += 1
    eps = 1e-9
    prec = [(t / n) / (t / n + (p - t) / n + eps) for t, p in zip(tp, npred)]
    rec = [(t / n) / (t / n + (q - t) / n + eps) for t, q in zip(tp, npos)]
    f1 = [2 * (t / n) / (2 * (t / n) + (q - t) / n + (p - t) / n + eps)
          for t, p, q in zip(tp, npred, npos)]
    return {
        "instp": inst_p / n,
        "instr": inst_r / n_r if n_r else 0.0,
        "macro-precision": sum(prec) / m,
        "macro-recall": sum(rec) / m,
        "macro-f1": sum(f1) / m,
    }
