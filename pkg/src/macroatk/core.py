"""Domain types, budgeted top-k selection, confusion tensors and Madow sampling.

Conventions used throughout the package:

* a confusion tensor is stored as a float array of shape ``(m, 2, 2)`` where
  ``C[j, u, v]`` is the mass of instances with true label ``u`` and prediction
  ``v`` for label ``j``; i.e. ``C[j] == [[tn, fp], [fn, tp]]``;
* marginals are ``(n, m)`` arrays or CSR matrices with values in ``[0, 1]``;
  entries missing from a sparse row are exact zeros;
* hard predictions are ``(n, m)`` CSR matrices with exactly ``k`` stored ones
  per row, columns sorted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .exceptions import (
    BudgetViolationError,
    InvalidBudgetError,
    InvalidClassifierError,
    InvalidDistributionError,
    InvalidInputError,
    InvalidMarginalsError,
    ShapeError,
)

CONFUSION_SUM_TOL = 1e-9
BUDGET_TOL = 1e-6
MADOW_TOL = 1e-6

#: rows per dense block when scoring sparse or large marginal matrices
DEFAULT_CHUNK_ROWS = 8192


def make_rng(seed=None, stream=None):
    """Return a numpy ``Generator``.

    ``stream`` selects an independent child stream of ``seed``; the stream for
    ``(seed, i)`` equals the ``i``-th child of ``SeedSequence(seed).spawn``.
    An existing ``Generator`` is passed through unchanged.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if stream is None:
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(stream),)))


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BinaryConfusion:
    """Normalized 2x2 confusion matrix of a single label."""

    tn: float
    fp: float
    fn: float
    tp: float

    def __post_init__(self):
        vals = self.as_array()
        if not np.all(np.isfinite(vals)) or np.any(vals < -CONFUSION_SUM_TOL):
            raise InvalidInputError(f"confusion entries must be non-negative: {vals.ravel()}")
        if abs(vals.sum() - 1.0) > CONFUSION_SUM_TOL:
            raise InvalidInputError(f"confusion entries must sum to 1, got {vals.sum()!r}")

    def as_array(self):
        return np.array([[self.tn, self.fp], [self.fn, self.tp]], dtype=float)

    @classmethod
    def from_array(cls, c):
        c = np.asarray(c, dtype=float).reshape(2, 2)
        return cls(tn=c[0, 0], fp=c[0, 1], fn=c[1, 0], tp=c[1, 1])


@dataclass(frozen=True)
class ConfusionTensor:
    """Per-label confusion matrices of a classifier budgeted at ``k``."""

    matrices: np.ndarray
    k: int

    def __post_init__(self):
        c = np.array(self.matrices, dtype=float)
        if c.ndim != 3 or c.shape[1:] != (2, 2) or c.shape[0] < 1:
            raise ShapeError(f"confusion tensor must have shape (m, 2, 2), got {c.shape}")
        if not np.all(np.isfinite(c)) or np.any(c < -CONFUSION_SUM_TOL):
            raise InvalidInputError("confusion tensor entries must be finite and non-negative")
        sums = c.sum(axis=(1, 2))
        if np.any(np.abs(sums - 1.0) > CONFUSION_SUM_TOL):
            raise InvalidInputError(
                f"every per-label matrix must sum to 1 (worst deviation {np.abs(sums - 1).max():.3g})"
            )
        if self.k < 1:
            raise InvalidBudgetError(f"budget must be positive, got {self.k}")
        predicted = c[:, 0, 1].sum() + c[:, 1, 1].sum()
        if abs(predicted - self.k) > BUDGET_TOL:
            raise BudgetViolationError(
                f"budget identity violated: sum(fp + tp) = {predicted!r}, k = {self.k}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "matrices", c)
        object.__setattr__(self, "k", int(self.k))

    @property
    def m(self):
        return self.matrices.shape[0]

    tn = property(lambda self: self.matrices[:, 0, 0])
    fp = property(lambda self: self.matrices[:, 0, 1])
    fn = property(lambda self: self.matrices[:, 1, 0])
    tp = property(lambda self: self.matrices[:, 1, 1])

    @property
    def per_label(self):
        return [BinaryConfusion.from_array(c) for c in self.matrices]

    @classmethod
    def from_binary(cls, confusions: Sequence[BinaryConfusion], k):
        return cls(np.stack([c.as_array() for c in confusions]), k)

    def mix(self, other: "ConfusionTensor", alpha):
        """Return ``(1 - alpha) * self + alpha * other``."""
        if other.matrices.shape != self.matrices.shape:
            raise ShapeError("cannot mix confusion tensors of different shapes")
        return ConfusionTensor((1.0 - alpha) * self.matrices + alpha * other.matrices, self.k)

    def budget_gap(self):
        """Absolute deviation of ``sum_j (fp_j + tp_j)`` from ``k``."""
        return abs(float(self.fp.sum() + self.tp.sum()) - self.k)


@dataclass(frozen=True)
class AffineTopK:
    """Deterministic classifier predicting ``topk(a * eta + b)``."""

    a: np.ndarray
    b: np.ndarray
    k: int

    def __post_init__(self):
        a = np.array(self.a, dtype=float).ravel()
        b = np.array(self.b, dtype=float).ravel()
        if a.shape != b.shape:
            raise ShapeError(f"a and b must have the same length, got {a.size} and {b.size}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise InvalidInputError("affine coefficients must be finite")
        check_budget(self.k, a.size)
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "k", int(self.k))

    @property
    def m(self):
        return self.a.size

    def decision_function(self, marginals):
        """Dense ``(n, m)`` scores ``a * eta + b`` (or a 1-d vector for one row)."""
        if sp.issparse(marginals):
            marginals = marginals.toarray()
        eta = np.asarray(marginals, dtype=float)
        if eta.shape[-1] != self.m:
            raise ShapeError(f"expected {self.m} labels, got {eta.shape[-1]}")
        return eta * self.a + self.b


@dataclass(frozen=True)
class RandomizedClassifier:
    """Finite mixture of affine top-k classifiers sharing ``k`` and ``m``."""

    components: tuple
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise InvalidClassifierError("a randomized classifier needs at least one component")
        w = np.array(self.weights if self.weights is not None else [1.0], dtype=float).ravel()
        if w.size != len(comps):
            raise InvalidClassifierError(f"{len(comps)} components but {w.size} weights")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise InvalidClassifierError("mixture weights must be non-negative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise InvalidClassifierError(f"mixture weights must sum to 1, got {w.sum()!r}")
        k, m = comps[0].k, comps[0].m
        if any(c.k != k or c.m != m for c in comps):
            raise InvalidClassifierError("all components must share k and m")
        w.setflags(write=False)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)

    @property
    def k(self):
        return self.components[0].k

    @property
    def m(self):
        return self.components[0].m

    def __len__(self):
        return len(self.components)


# ---------------------------------------------------------------------------
# Validation helpers
# ---------------------------------------------------------------------------


def check_budget(k, m):
    if int(k) != k or k < 1 or k > m:
        raise InvalidBudgetError(f"budget k must satisfy 1 <= k <= m = {m}, got {k}")
    return int(k)


def _as_marginals(marginals):
    """Return a CSR matrix or 2-d float array, validating the value range."""
    if sp.issparse(marginals):
        x = sp.csr_matrix(marginals, dtype=float)
        if not x.has_canonical_format:
            x = x.copy()
            x.sum_duplicates()
        vals = x.data
    else:
        x = np.asarray(marginals, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2:
            raise ShapeError(f"marginals must be 2-d, got shape {x.shape}")
        vals = x
    if not np.all(np.isfinite(vals)):
        raise InvalidInputError("marginals must be finite")
    if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
        raise InvalidInputError("marginals must lie in [0, 1]")
    return x


def _as_truth(labels):
    """Return labels as CSR (hard or soft) or a dense float array."""
    if sp.issparse(labels):
        return sp.csr_matrix(labels, dtype=float)
    y = np.asarray(labels, dtype=float)
    if y.ndim == 1:
        y = y[None, :]
    return y


# ---------------------------------------------------------------------------
# Top-k selection and prediction
# ---------------------------------------------------------------------------


def topk_indices(scores, k):
    """Sorted column indices of the ``k`` largest entries in every row.

    Ties at the k-th value are resolved in favour of the smaller column index.
    Returns an integer array of shape ``(n, k)``.
    """
    s = np.atleast_2d(np.asarray(scores, dtype=float))
    n, m = s.shape
    check_budget(k, m)
    if not np.all(np.isfinite(s)):
        raise InvalidInputError("scores must be finite")
    if k == m:
        return np.broadcast_to(np.arange(m), (n, m)).copy()
    idx = np.argpartition(s, m - k, axis=1)[:, m - k:]
    vals = np.take_along_axis(s, idx, axis=1)
    kth = vals.min(axis=1, keepdims=True)
    # argpartition picks arbitrary members of a tie at the k-th value; redo those rows
    ambiguous = np.flatnonzero((s == kth).sum(axis=1) > (vals == kth).sum(axis=1))
    if ambiguous.size:
        sub = s[ambiguous]
        t = kth[ambiguous]
        greater = sub > t
        equal = sub == t
        need = k - greater.sum(axis=1, keepdims=True)
        mask = greater | (equal & (np.cumsum(equal, axis=1) <= need))
        idx[ambiguous] = np.nonzero(mask)[1].reshape(-1, k)
    idx.sort(axis=1)
    return idx


def topk_mask(scores, k):
    """Boolean mask of the ``k`` largest entries in every row of ``scores``.

    Ties at the k-th value are resolved in favour of the smaller column index.
    """
    scores = np.asarray(scores, dtype=float)
    s = np.atleast_2d(scores)
    idx = topk_indices(s, k)
    mask = np.zeros(s.shape, dtype=bool)
    np.put_along_axis(mask, idx, True, axis=1)
    return mask[0] if scores.ndim == 1 else mask


def topk_select(scores, k):
    """Return the k-hot integer vector selecting the k largest scores."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 1:
        raise ShapeError("topk_select expects a 1-d score vector")
    return topk_mask(scores, k).astype(np.int8)


def _mask_to_csr(mask):
    rows, cols = np.nonzero(mask)
    n, m = mask.shape
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return sp.csr_matrix((np.ones(cols.size), cols, indptr), shape=(n, m))


def predict_deterministic(clf: AffineTopK, marginal_row):
    """k-hot prediction of ``clf`` for a single marginal row.

    ``marginal_row`` may be a dense vector or a ``1 x m`` sparse row; labels
    absent from a sparse row score ``b_j``.
    """
    if sp.issparse(marginal_row):
        if marginal_row.shape[0] != 1:
            raise ShapeError("expected a single sparse row")
        row = marginal_row.toarray().ravel()
    else:
        row = np.asarray(marginal_row, dtype=float)
        if row.ndim != 1:
            raise ShapeError("expected a single marginal row")
    if row.size != clf.m:
        raise ShapeError(f"marginal row has {row.size} labels, classifier has {clf.m}")
    return topk_select(clf.a * row + clf.b, clf.k)


def _topk_labels(scores, labels, k, m, return_positions=False):
    """Top-k of candidate ``scores`` with ties going to the smaller label.

    ``labels`` gives the label of every candidate column; padding columns
    carry score ``-inf``. Returns sorted labels, shape ``(n, k)``.
    """
    sel = np.argpartition(-scores, k - 1, axis=1)[:, :k]
    vals = np.take_along_axis(scores, sel, axis=1)
    kth = vals.min(axis=1, keepdims=True)
    ambiguous = np.flatnonzero((scores == kth).sum(axis=1) > (vals == kth).sum(axis=1))
    if ambiguous.size:
        sub, lab, t = scores[ambiguous], labels[ambiguous], kth[ambiguous]
        greater = sub > t
        equal = sub == t
        need = k - greater.sum(axis=1, keepdims=True)
        order = np.argsort(np.where(equal, lab, m + 1), axis=1, kind="stable")
        rank = np.empty_like(order)
        np.put_along_axis(rank, order, np.arange(sub.shape[1]), axis=1)
        chosen = greater | (equal & (rank < need))
        sel[ambiguous] = np.nonzero(chosen)[1].reshape(-1, k)
    out = np.take_along_axis(labels, sel, axis=1)
    order = np.argsort(out, axis=1)
    out = np.take_along_axis(out, order, axis=1)
    if return_positions:
        return out, np.take_along_axis(sel, order, axis=1)
    return out


def _sparse_block_topk(clf, block, shortlist):
    """Top-k of a CSR block scoring only stored entries and the ``shortlist``.

    A label that is not stored in a row scores ``b_j``. Among the shortlist
    (the labels with the largest ``b``, ties to the smaller index) at least
    ``k`` are unstored in every row, so no other unstored label can win.
    Shortlist candidates are scored ``b_j`` even when the label is stored;
    rows where such a candidate gets selected are redone densely.
    """
    r, m = block.shape[0], clf.m
    counts = np.diff(block.indptr)
    width = int(counts.max()) if r else 0
    t = shortlist.size
    scores = np.empty((r, width + t))
    labels = np.empty((r, width + t), dtype=np.int64)
    idx = block.indices
    vals = block.data * clf.a[idx]
    vals += clf.b[idx]
    if np.all(counts == width):
        scores[:, :width] = vals.reshape(r, width)
        labels[:, :width] = idx.reshape(r, width)
    else:
        rows = np.repeat(np.arange(r), counts)
        pos = np.arange(idx.size) - np.repeat(block.indptr[:-1], counts)
        scores[:, :width] = -np.inf
        labels[:, :width] = m
        scores[rows, pos] = vals
        labels[rows, pos] = idx
    scores[:, width:] = clf.b[shortlist]
    labels[:, width:] = shortlist
    out, sel = _topk_labels(scores, labels, clf.k, m, return_positions=True)
    qi, qc = np.nonzero(sel >= width)
    if qi.size and idx.size:
        # a selected b-only candidate is wrong if its label is stored in the row
        keys = np.repeat(np.arange(r, dtype=np.int64), counts) * m + idx
        query = qi * m + out[qi, qc]
        at = np.minimum(np.searchsorted(keys, query), keys.size - 1)
        bad = np.unique(qi[keys[at] == query])
        if bad.size:
            dense = block[bad].toarray()
            dense *= clf.a
            dense += clf.b
            out[bad] = topk_indices(dense, clf.k)
    return out


def predict_batch(clf: AffineTopK, marginals, chunk_rows=DEFAULT_CHUNK_ROWS):
    """k-hot CSR predictions of ``clf`` for every row of ``marginals``.

    Sparse rows are scored on their stored entries plus a shortlist of
    ``k + max stored per row`` labels, so truncated marginals cost
    ``O(n (k + k'))`` per call instead of ``O(n m)``.
    """
    x = _as_marginals(marginals)
    n, m = x.shape
    if m != clf.m:
        raise ShapeError(f"marginals have {m} labels, classifier has {clf.m}")
    k = clf.k
    shortlist = None
    if sp.issparse(x) and n:
        width = int(np.diff(x.indptr).max())
        if k + width < m // 2:
            shortlist = np.lexsort((np.arange(m), -clf.b))[:k + width]
    cols = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, chunk_rows):
        block = x[start:start + chunk_rows]
        stop = start + block.shape[0]
        if shortlist is not None:
            cols[start:stop] = _sparse_block_topk(clf, block, shortlist)
            continue
        block = block.toarray() if sp.issparse(block) else block * 1.0
        np.multiply(block, clf.a, out=block)
        block += clf.b
        cols[start:stop] = topk_indices(block, k)
    indptr = np.arange(0, n * k + 1, k, dtype=np.int64)
    return sp.csr_matrix((np.ones(n * k), cols.ravel(), indptr), shape=(n, m))


def predict_randomized(rclf: RandomizedClassifier, marginal_row, rng=None):
    """Sample one component with probability ``alpha_i`` and apply it."""
    if not isinstance(rclf, RandomizedClassifier) or len(rclf) == 0:
        raise InvalidClassifierError("predict_randomized needs a non-empty RandomizedClassifier")
    rng = make_rng(rng)
    i = rng.choice(len(rclf), p=rclf.weights)
    return predict_deterministic(rclf.components[i], marginal_row)


def predict_randomized_batch(rclf: RandomizedClassifier, marginals, rng=None,
                             chunk_rows=DEFAULT_CHUNK_ROWS):
    """Per-instance component sampling for every row; returns CSR predictions."""
    x = _as_marginals(marginals)
    n = x.shape[0]
    rng = make_rng(rng)
    choice = rng.choice(len(rclf), size=n, p=rclf.weights)
    blocks = []
    for i, comp in enumerate(rclf.components):
        rows = np.flatnonzero(choice == i)
        if rows.size:
            blocks.append((rows, predict_batch(comp, x[rows], chunk_rows)))
    if not blocks:
        return sp.csr_matrix((0, rclf.m))
    order = np.concatenate([r for r, _ in blocks])
    stacked = sp.vstack([p for _, p in blocks], format="csr")
    inverse = np.empty(n, dtype=np.int64)
    inverse[order] = np.arange(n)
    return stacked[inverse]


def randomized_marginals(rclf: RandomizedClassifier, marginals, chunk_rows=DEFAULT_CHUNK_ROWS):
    """Fractional per-instance predictions ``sum_i alpha_i h_i(x)`` as CSR.

    Every row lies in the budget simplex and can be realized with
    :func:`madow_sample_rows`.
    """
    total = None
    for w, comp in zip(rclf.weights, rclf.components):
        if w == 0.0:
            continue
        part = predict_batch(comp, marginals, chunk_rows) * w
        total = part if total is None else total + part
    return total.tocsr()


# ---------------------------------------------------------------------------
# Madow's systematic sampling
# ---------------------------------------------------------------------------


def _renormalize(pi, k, tol):
    total = pi.sum()
    if abs(total - k) > tol:
        raise InvalidMarginalsError(f"marginals sum to {total!r}, expected {k}")
    if total > k:
        pi = pi * (k / total)
    elif total < k:
        room = 1.0 - pi
        pi = pi + room * ((k - total) / room.sum())
    return pi


def _madow_inputs(pi, k, tol):
    pi = np.asarray(pi, dtype=float).ravel()
    if not np.all(np.isfinite(pi)) or np.any(pi < -tol) or np.any(pi > 1.0 + tol):
        raise InvalidMarginalsError("inclusion probabilities must lie in [0, 1]")
    pi = np.clip(pi, 0.0, 1.0)
    if k is None:
        k = int(round(pi.sum()))
    pi = _renormalize(pi, k, tol)
    cum = np.cumsum(pi)
    if k:
        cum[-1] = k
    return pi, k, cum


def madow_sample(pi, rng=None, k=None, tol=MADOW_TOL):
    """Draw a k-hot vector whose inclusion probabilities are ``pi``.

    Systematic sampling on the cumulative sums of ``pi``: one uniform ``U`` in
    ``(0, 1]`` picks, for ``i = 0..k-1``, the label ``j`` whose cumulative
    interval ``(P_{j-1}, P_j]`` contains ``U + i``. Runs in ``O(m)``.
    """
    pi, k, cum = _madow_inputs(pi, k, tol)
    out = np.zeros(pi.size, dtype=np.int8)
    if k == 0:
        return out
    u = 1.0 - make_rng(rng).random()
    idx = np.searchsorted(cum, u + np.arange(k), side="left")
    out[idx] = 1
    return out


def madow_sample_many(pi, draws, rng=None, k=None, tol=MADOW_TOL):
    """``draws`` independent Madow samples of one ``pi`` as a ``(draws, k)`` index array.

    Row ``r`` equals the support of ``madow_sample(pi, rng)`` for the ``r``-th
    uniform drawn from ``rng``; indices are increasing within each row.
    """
    _, k, cum = _madow_inputs(pi, k, tol)
    u = 1.0 - make_rng(rng).random(int(draws))
    return np.searchsorted(cum, u[:, None] + np.arange(k), side="left")


def madow_sample_rows(fractional, rng=None, k=None, tol=MADOW_TOL):
    """Apply :func:`madow_sample` to every row; returns CSR k-hot predictions."""
    x = _as_marginals(fractional)
    rng = make_rng(rng)
    n, m = x.shape
    rows = []
    for i in range(n):
        if sp.issparse(x):
            lo, hi = x.indptr[i], x.indptr[i + 1]
            cols, vals = x.indices[lo:hi], x.data[lo:hi]
            try:
                picked = madow_sample(vals, rng, k=k, tol=tol)
            except InvalidMarginalsError as exc:
                raise InvalidMarginalsError(f"row {i}: {exc}") from None
            rows.append(np.sort(cols[picked.astype(bool)]))
        else:
            try:
                picked = madow_sample(x[i], rng, k=k, tol=tol)
            except InvalidMarginalsError as exc:
                raise InvalidMarginalsError(f"row {i}: {exc}") from None
            rows.append(np.flatnonzero(picked))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum([r.size for r in rows], out=indptr[1:])
    indices = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
    return sp.csr_matrix((np.ones(indices.size), indices, indptr), shape=(n, m))


# ---------------------------------------------------------------------------
# Confusion tensors
# ---------------------------------------------------------------------------


def _row_budget(predictions, tol=BUDGET_TOL):
    sums = np.asarray(predictions.sum(axis=1)).ravel()
    if sums.size == 0:
        raise InvalidInputError("no instances")
    k = int(round(sums[0]))
    bad = np.flatnonzero(np.abs(sums - k) > tol)
    if bad.size:
        i = bad[0]
        raise BudgetViolationError(f"row {i} predicts {sums[i]!r} labels, expected {k}")
    return k


def confusion_counts(predictions, labels, sample_weight=None):
    """Unnormalized confusion mass ``(m, 2, 2)`` plus total weight.

    Partial results over disjoint instance blocks can be added entrywise and
    normalized once by the summed weight.
    """
    if sp.issparse(predictions):
        h = sp.csr_matrix(predictions, dtype=float)
    else:
        h = np.atleast_2d(np.asarray(predictions, dtype=float))
    y = _as_truth(labels)
    if h.shape != y.shape:
        raise ShapeError(f"predictions {h.shape} and labels {y.shape} differ in shape")
    n, m = h.shape
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    if w.shape != (n,):
        raise ShapeError("sample_weight must have one entry per instance")
    if sp.issparse(h):
        hy = h.multiply(y)
    elif sp.issparse(y):
        hy = y.multiply(h)
    else:
        hy = h * y
    tp = np.asarray(hy.T @ w).ravel()
    pred = np.asarray(h.T @ w).ravel()
    pos = np.asarray(y.T @ w).ravel()
    total = float(w.sum())
    fp = pred - tp
    fn = pos - tp
    tn = total - tp - fp - fn
    counts = np.stack([tn, fp, fn, tp], axis=1).reshape(m, 2, 2)
    return counts, total


def _normalize_counts(counts, total, k):
    c = counts / total
    # cancellation in tn = 1 - tp - fp - fn can leave -1e-17 style residue
    c[(c < 0) & (c > -1e-12)] = 0.0
    return ConfusionTensor(c, k)


def empirical_confusion(predictions, labels, sample_weight=None, k=None):
    """Empirical confusion tensor of k-hot ``predictions`` against ``labels``.

    ``labels`` may be binary (CSR or dense) or soft marginals, in which case
    the result is the expected confusion tensor under those marginals.
    """
    if not sp.issparse(predictions):
        predictions = np.atleast_2d(np.asarray(predictions, dtype=float))
    budget = _row_budget(predictions)
    if k is not None and budget != k:
        raise BudgetViolationError(f"predictions use budget {budget}, expected {k}")
    counts, total = confusion_counts(predictions, labels, sample_weight)
    if total <= 0:
        raise InvalidInputError("total instance weight must be positive")
    return _normalize_counts(counts, total, budget)


def expected_confusion_randomized(rclf: RandomizedClassifier, marginals, labels,
                                  sample_weight=None):
    """Confusion tensor of a mixture: the weight-mixed component tensors."""
    acc = np.zeros((rclf.m, 2, 2))
    for w, comp in zip(rclf.weights, rclf.components):
        if w == 0.0:
            continue
        acc += w * empirical_confusion(predict_batch(comp, marginals), labels,
                                       sample_weight).matrices
    return ConfusionTensor(acc, rclf.k)


def population_confusion_discrete(assignment, dist):
    """Population confusion tensor of a (possibly fractional) assignment.

    ``dist`` is any object exposing ``weights`` (length ``n``) and
    ``marginals`` (``n x m``); ``assignment`` holds one row of the budget
    simplex per support point.
    """
    weights = np.asarray(dist.weights, dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise InvalidDistributionError(f"weights must be non-negative and sum to 1, got {weights.sum()!r}")
    eta = np.asarray(dist.marginals, dtype=float)
    h = np.atleast_2d(np.asarray(assignment, dtype=float))
    if h.shape != eta.shape:
        raise ShapeError(f"assignment {h.shape} does not match distribution {eta.shape}")
    return empirical_confusion(h, eta, sample_weight=weights)


def predictions_from_indices(index_rows: Sequence[Sequence[int]], m: Optional[int] = None):
    """Build a CSR prediction matrix from per-row label index lists."""
    rows = [np.unique(np.asarray(r, dtype=np.int64)) for r in index_rows]
    if m is None:
        m = max((int(r.max()) + 1 for r in rows if r.size), default=0)
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    np.cumsum([r.size for r in rows], out=indptr[1:])
    indices = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
    return sp.csr_matrix((np.ones(indices.size), indices, indptr), shape=(len(rows), m))
