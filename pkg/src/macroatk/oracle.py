"""Exhaustive optima of budgeted classifiers on tiny discrete distributions.

The search space is every assignment of a k-subset of labels to each support
point. Vertex confusion tensors are built by broadcasting the per-point
contributions, so all ``C(m, k) ** n`` tensors are materialized at once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    RandomizedClassifier,
    check_budget,
    make_rng,
    population_confusion_discrete,
    predict_batch,
)
from .exceptions import InvalidDistributionError, SearchSpaceTooLargeError, ShapeError
from .fw import FWConfig, empirical_provider, fixed_schedule_step, frank_wolfe, maximize_on_interval
from .metrics import DEFAULT_EPS, JACCARD, MetricId, _values, parse_metric

DEFAULT_LIMIT = 10**6

#: Smoothing under which the published values of the label-coupling example
#: are reproduced to all six printed decimals.
APPENDIX_E_EPS = 1e-5


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite distribution over instances, each given by its label marginals."""

    weights: np.ndarray
    marginals: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        eta = np.array(self.marginals, dtype=float)
        if eta.ndim != 2 or eta.shape[0] != w.size:
            raise ShapeError(f"need one marginal row per weight, got {eta.shape} for {w.size} weights")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidDistributionError(f"weights must be non-negative and sum to 1, got {w.sum()!r}")
        if np.any(eta < 0) or np.any(eta > 1):
            raise InvalidDistributionError("marginals must lie in [0, 1]")
        w.setflags(write=False)
        eta.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "marginals", eta)

    @property
    def n(self):
        return self.weights.size

    @property
    def m(self):
        return self.marginals.shape[1]

    def priors(self):
        """Population label priors ``P(y_j = 1)``."""
        return self.weights @ self.marginals


APPENDIX_E_A = DiscreteDistribution([0.5, 0.5], [[0.4, 0.2, 0.6], [0.8, 0.4, 0.4]])
APPENDIX_E_B = DiscreteDistribution([0.5, 0.5], [[0.4, 0.2, 0.6], [0.8, 0.4, 0.8]])
BUILTIN_DISTRIBUTIONS = {"appendixE-A": APPENDIX_E_A, "appendixE-B": APPENDIX_E_B}


def search_space_size(n, m, k):
    return math.comb(m, k) ** n


def enumerate_assignments(n, m, k, limit=DEFAULT_LIMIT):
    """Yield every tuple of ``n`` k-subsets of ``range(m)`` in lexicographic order."""
    check_budget(k, m)
    size = search_space_size(n, m, k)
    if size > limit:
        raise SearchSpaceTooLargeError(f"C({m},{k})^{n} = {size} assignments exceed the limit {limit}")
    subsets = list(itertools.combinations(range(m), k))
    return itertools.product(subsets, repeat=n)


def assignment_matrix(assignment, m):
    """``(n, m)`` 0/1 matrix of an assignment given as per-point label tuples."""
    out = np.zeros((len(assignment), m))
    for i, labels in enumerate(assignment):
        out[i, list(labels)] = 1.0
    return out


def vertex_tensors(dist: DiscreteDistribution, k, limit=DEFAULT_LIMIT):
    """Confusion tensors of all assignments, shape ``(N, m, 2, 2)``.

    Row order matches :func:`enumerate_assignments`; returns the subsets too.
    """
    n, m = dist.n, dist.m
    check_budget(k, m)
    size = search_space_size(n, m, k)
    if size > limit:
        raise SearchSpaceTooLargeError(f"C({m},{k})^{n} = {size} assignments exceed the limit {limit}")
    subsets = list(itertools.combinations(range(m), k))
    hot = np.zeros((len(subsets), m))
    for s, labels in enumerate(subsets):
        hot[s, list(labels)] = 1.0
    total = None
    for w, eta in zip(dist.weights, dist.marginals):
        # contribution of one point for each subset: w * [[(1-e)(1-h), (1-e)h], [e(1-h), eh]]
        part = np.empty((len(subsets), m, 2, 2))
        part[:, :, 0, 0] = (1 - eta) * (1 - hot)
        part[:, :, 0, 1] = (1 - eta) * hot
        part[:, :, 1, 0] = eta * (1 - hot)
        part[:, :, 1, 1] = eta * hot
        part *= w
        total = part if total is None else (total[:, None] + part[None]).reshape(-1, m, 2, 2)
    return total, subsets


def _values_many(metric, tensors, k, eps):
    """Metric value of every tensor in a ``(N, m, 2, 2)`` stack."""
    if isinstance(metric, MetricId):
        N, m = tensors.shape[:2]
        inst = np.clip(tensors[:, :, 1, 1].sum(axis=1) / k, 0.0, 1.0)
        if metric.tag == "instance_precision_at_k":
            return inst
        inner = metric.inner if metric.tag == "mixed" else metric
        macro = _values(inner, tensors.reshape(N * m, 2, 2), eps).reshape(N, m).mean(axis=1)
        if metric.tag == "mixed":
            return (1.0 - metric.lam) * inst + metric.lam * macro
        return macro
    return np.array([metric.value(t, k=k, eps=eps) for t in tensors])


def _resolve(metric):
    return parse_metric(metric) if isinstance(metric, str) else metric


def best_deterministic(metric, dist: DiscreteDistribution, k, eps=DEFAULT_EPS,
                       limit=DEFAULT_LIMIT, tie_tol=1e-12):
    """Best deterministic assignment by exhaustive search.

    Returns ``(assignment, value)``; the assignment is a tuple of per-point
    label tuples, the lexicographically smallest among values within
    ``tie_tol`` of the maximum.
    """
    metric = _resolve(metric)
    tensors, subsets = vertex_tensors(dist, k, limit)
    vals = _values_many(metric, tensors, k, eps)
    best = int(np.flatnonzero(vals >= vals.max() - tie_tol)[0])
    S = len(subsets)
    digits = []
    rest = best
    for _ in range(dist.n):
        rest, d = divmod(rest, S)
        digits.append(subsets[d])
    assignment = tuple(reversed(digits))
    value = metric.value(population_confusion_discrete(assignment_matrix(assignment, dist.m), dist).matrices,
                         k=k, eps=eps)
    return assignment, float(value)


@dataclass
class VertexMixture:
    """Mixture over enumerated assignments found by vertex Frank-Wolfe."""

    assignments: list
    weights: np.ndarray
    value: float
    confusion: np.ndarray = field(repr=False)


def best_randomized_vertex_fw(metric, dist: DiscreteDistribution, k, iters=10**4,
                              step="fixed", eps=DEFAULT_EPS, limit=DEFAULT_LIMIT, gap_tol=1e-12):
    """Frank-Wolfe over the convex hull of all vertex confusion tensors.

    The linear subproblem is solved by scanning every vertex. The search
    starts from the best vertex and returns the best iterate seen, so the
    result never falls below :func:`best_deterministic`.
    """
    metric = _resolve(metric)
    tensors, subsets = vertex_tensors(dist, k, limit)
    flat = tensors.reshape(tensors.shape[0], -1)
    vals = _values_many(metric, tensors, k, eps)
    start = int(np.argmax(vals))
    weights = np.zeros(tensors.shape[0])
    weights[start] = 1.0
    C = tensors[start].copy()
    best_val, best_w, best_C = float(vals[start]), weights.copy(), C.copy()
    for i in range(1, iters + 1):
        G = np.asarray(metric.gradient(C, k=k, eps=eps)).ravel()
        lin = flat @ G
        s = int(np.argmax(lin))
        if lin[s] - G @ C.ravel() <= gap_tol:
            break
        if step == "fixed":
            # offset by one so the first step keeps half of the starting vertex
            alpha = fixed_schedule_step(i + 1)
        else:
            Cs = tensors[s]
            alpha = maximize_on_interval(
                lambda a: metric.value((1 - a) * C + a * Cs, k=k, eps=eps))
            if alpha <= 0.0:
                break
        C = (1 - alpha) * C + alpha * tensors[s]
        weights *= 1 - alpha
        weights[s] += alpha
        v = float(metric.value(C, k=k, eps=eps))
        if v > best_val:
            best_val, best_w, best_C = v, weights.copy(), C.copy()
    S = len(subsets)
    support = np.flatnonzero(best_w > 0)
    assignments = []
    for idx in support:
        digits, rest = [], int(idx)
        for _ in range(dist.n):
            rest, d = divmod(rest, S)
            digits.append(subsets[d])
        assignments.append(tuple(reversed(digits)))
    return VertexMixture(assignments, best_w[support], best_val, best_C)


def random_discrete_distribution(seed, n, m, denominator: Optional[int] = None):
    """Random distribution: Dirichlet(1) weights and Uniform(0, 1) marginals.

    With ``denominator`` the weights are positive multiples of ``1/denominator``
    so that the distribution can be replicated into a finite dataset.
    """
    rng = make_rng(seed)
    if denominator is None:
        w = rng.dirichlet(np.ones(n))
    else:
        if denominator < n:
            raise ValueError("denominator must be at least n")
        # composition of `denominator` into n positive parts
        cuts = np.sort(rng.choice(np.arange(1, denominator), size=n - 1, replace=False))
        w = np.diff(np.concatenate([[0], cuts, [denominator]])) / denominator
    w = w / w.sum()
    eta = rng.uniform(0.0, 1.0, size=(n, m))
    return DiscreteDistribution(w, eta)


def materialize(dist: DiscreteDistribution, denominator=100):
    """Replicate every support point ``weight * denominator`` times.

    Returns ``(marginals, soft_labels)``; the soft labels equal the marginals
    so that confusion tensors on the dataset equal population tensors.
    """
    counts = dist.weights * denominator
    rounded = np.rint(counts)
    if np.any(np.abs(counts - rounded) > 1e-9):
        raise InvalidDistributionError(f"weights are not multiples of 1/{denominator}")
    rows = np.repeat(np.arange(dist.n), rounded.astype(int))
    eta = dist.marginals[rows]
    return eta, eta.copy()


def run_fw_on_distribution(metric, dist: DiscreteDistribution, k, cfg: Optional[FWConfig] = None):
    """Affine top-k Frank-Wolfe with exact population confusion tensors."""
    provider = empirical_provider(dist.marginals, dist.marginals, dist.weights)
    rclf, trace, C = frank_wolfe(_resolve(metric), provider, dist.m, k, cfg)
    return rclf, trace, C


def classifier_value(metric, clf, dist: DiscreteDistribution, eps=DEFAULT_EPS):
    """Population value of an affine or randomized classifier on ``dist``."""
    metric = _resolve(metric)
    comps = clf.components if isinstance(clf, RandomizedClassifier) else (clf,)
    wts = clf.weights if isinstance(clf, RandomizedClassifier) else (1.0,)
    acc = 0.0
    for w, comp in zip(wts, comps):
        h = predict_batch(comp, dist.marginals).toarray()
        acc = acc + w * population_confusion_discrete(h, dist).matrices
    return float(metric.value(acc, k=comps[0].k, eps=eps))


@dataclass
class CouplingReport:
    values: dict
    assignments: dict
    expected_values: dict
    expected_assignments: dict
    tolerance: float
    randomized_values: dict = field(default_factory=dict)

    @property
    def values_match(self):
        return all(abs(self.values[d] - self.expected_values[d]) <= self.tolerance for d in self.values)

    @property
    def assignments_match(self):
        return all(self.assignments[d] == self.expected_assignments[d] for d in self.assignments)

    @property
    def flip(self):
        """Labels 0 and 1 of the first instance swap between the two optima."""
        a = set(self.assignments["appendixE-A"][0])
        b = set(self.assignments["appendixE-B"][0])
        return (0 in a and 1 not in a) and (1 in b and 0 not in b)

    @property
    def deterministic(self):
        """No mixture of vertices beats the best vertex (the optima are 0/1)."""
        return all(self.randomized_values[d] <= self.values[d] + self.tolerance
                   for d in self.randomized_values)

    @property
    def passed(self):
        return self.values_match and self.assignments_match and self.flip and self.deterministic


def coupling_witness(metric=JACCARD, k=2, eps=APPENDIX_E_EPS, tol=1e-6):
    """Reproduce the macro-Jaccard@2 label-coupling example on its two distributions.

    Label indices are 0-based: the published optimum for the first instance
    under distribution A, labels {1, 3}, is ``(0, 2)`` here.
    """
    expected_values = {"appendixE-A": 0.453962, "appendixE-B": 0.471423}
    expected_assignments = {"appendixE-A": ((0, 2), (0, 1)), "appendixE-B": ((1, 2), (0, 2))}
    values, assignments, randomized = {}, {}, {}
    for name, dist in BUILTIN_DISTRIBUTIONS.items():
        assignment, value = best_deterministic(metric, dist, k, eps=eps)
        values[name] = value
        assignments[name] = assignment
        randomized[name] = best_randomized_vertex_fw(metric, dist, k, iters=2000, eps=eps).value
    return CouplingReport(values, assignments, expected_values, expected_assignments, tol,
                          randomized)
