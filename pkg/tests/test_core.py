import itertools

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from macroatk.core import (
    AffineTopK,
    BinaryConfusion,
    ConfusionTensor,
    RandomizedClassifier,
    confusion_counts,
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
    predictions_from_indices,
    randomized_marginals,
    topk_select,
)
from macroatk.exceptions import (
    BudgetViolationError,
    InvalidBudgetError,
    InvalidClassifierError,
    InvalidDistributionError,
    InvalidInputError,
    InvalidMarginalsError,
    ShapeError,
)
from macroatk.oracle import DiscreteDistribution


# -- top-k --------------------------------------------------------------------


@pytest.mark.parametrize("scores,k,expected", [
    ((0.1, 0.9, 0.5), 1, (0, 1, 0)),
    ((0.5, 0.5, 0.2), 1, (1, 0, 0)),
    ((3, 1, 2, 5), 2, (1, 0, 0, 1)),
])
def test_topk_select_examples(scores, k, expected):
    assert tuple(topk_select(scores, k)) == expected


def test_topk_select_errors():
    with pytest.raises(InvalidBudgetError):
        topk_select([1.0, 2.0], 3)
    with pytest.raises(InvalidBudgetError):
        topk_select([1.0, 2.0], 0)
    with pytest.raises(InvalidInputError):
        topk_select([1.0, np.nan], 1)


def _brute_topk(scores, k):
    order = sorted(range(len(scores)), key=lambda j: (-scores[j], j))
    out = np.zeros(len(scores), dtype=int)
    out[order[:k]] = 1
    return out


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=1, max_size=9), st.data())
def test_topk_matches_sorting_oracle(values, data):
    k = data.draw(st.integers(1, len(values)))
    scores = np.array(values, dtype=float)
    np.testing.assert_array_equal(topk_select(scores, k), _brute_topk(scores, k))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=12), st.data())
def test_topk_invariant_to_shift_and_positive_scale(values, data):
    k = data.draw(st.integers(1, len(values)))
    shift = data.draw(st.floats(-10, 10))
    scale = data.draw(st.floats(0.25, 4.0))
    # dyadic values keep shift/scale exact so ties survive the transform
    s = np.round(np.array(values) * 4) / 4
    base = topk_select(s, k)
    np.testing.assert_array_equal(topk_select(s + np.round(shift), k), base)
    np.testing.assert_array_equal(topk_select(s * 2.0 ** round(np.log2(scale)), k), base)


# -- deterministic prediction ---------------------------------------------------


@pytest.mark.parametrize("a,b,eta,k,expected", [
    ((2, 2, 2), (-1, -1, -1), (0.9, 0.1, 0.5), 2, (1, 0, 1)),
    ((1, 1), (0, 0), (0.3, 0.7), 1, (0, 1)),
    ((1 / 0.1, 1 / 0.9), (0, 0), (0.08, 0.5), 1, (1, 0)),
])
def test_predict_deterministic_examples(a, b, eta, k, expected):
    clf = AffineTopK(np.array(a, float), np.array(b, float), k)
    assert tuple(predict_deterministic(clf, np.array(eta))) == expected


def test_predict_sparse_row_absent_labels_score_intercept():
    clf = AffineTopK(np.ones(4), np.array([0.0, 0.0, 0.3, 0.0]), 2)
    row = sp.csr_matrix(([0.2], ([0], [3])), shape=(1, 4))
    # scores: (0, 0, 0.3, 0.2)
    assert tuple(predict_deterministic(clf, row)) == (0, 0, 1, 1)


def test_predict_shape_error():
    clf = AffineTopK(np.ones(3), np.zeros(3), 1)
    with pytest.raises(ShapeError):
        predict_deterministic(clf, np.ones(4) / 4)


def test_predict_batch_matches_rowwise(rng):
    X = rng.random((50, 12))
    clf = AffineTopK(rng.normal(size=12), rng.normal(size=12), 4)
    P = predict_batch(clf, X, chunk_rows=7)
    for i in range(50):
        np.testing.assert_array_equal(P[i].toarray().ravel(), predict_deterministic(clf, X[i]))
    Ps = predict_batch(clf, sp.csr_matrix(X * (X > 0.5)), chunk_rows=16)
    for i in range(50):
        np.testing.assert_array_equal(Ps[i].toarray().ravel(),
                                      predict_deterministic(clf, X[i] * (X[i] > 0.5)))


def test_affine_validation():
    with pytest.raises(ShapeError):
        AffineTopK(np.ones(3), np.zeros(2), 1)
    with pytest.raises(InvalidInputError):
        AffineTopK(np.array([1.0, np.inf]), np.zeros(2), 1)
    with pytest.raises(InvalidBudgetError):
        AffineTopK(np.ones(2), np.zeros(2), 3)


# -- Madow ----------------------------------------------------------------------


def test_madow_deterministic_marginals(rng):
    for _ in range(100):
        assert tuple(madow_sample([1, 0, 1], rng)) == (1, 0, 1)


def _frequencies(pi, draws, seed):
    rng = make_rng(seed)
    counts = np.zeros(len(pi))
    for _ in range(draws):
        s = madow_sample(pi, rng)
        assert s.sum() == round(sum(pi))
        counts += s
    return counts / draws


def test_madow_forced_label_and_halves():
    freq = _frequencies([0.5, 0.5, 1.0], 100_000, seed=1)
    assert freq[2] == 1.0
    assert abs(freq[0] - 0.5) <= 0.01 and abs(freq[1] - 0.5) <= 0.01


def test_madow_uniform_k1():
    freq = _frequencies([0.25] * 4, 100_000, seed=2)
    np.testing.assert_allclose(freq, 0.25, atol=0.01)


def test_madow_permutation_equivariance():
    pi = np.array([0.1, 0.7, 0.45, 0.75])
    perm = np.array([2, 0, 3, 1])
    f = _frequencies(pi, 50_000, seed=3)
    fp = _frequencies(pi[perm], 50_000, seed=4)
    np.testing.assert_allclose(fp, f[perm], atol=0.015)


def test_madow_renormalizes_small_drift_and_rejects_large():
    s = madow_sample(np.array([0.5, 0.5, 1.0]) * (1 + 2e-7), make_rng(0))
    assert s.sum() == 2
    s = madow_sample(np.array([1.0, 1.0, 1e-7]) - 1e-7, make_rng(0))
    assert s.sum() == 2
    with pytest.raises(InvalidMarginalsError):
        madow_sample([0.5, 0.5, 0.9], make_rng(0), k=2)
    with pytest.raises(InvalidMarginalsError):
        madow_sample([1.5, 0.5], make_rng(0))


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 15), st.data())
def test_madow_always_exactly_k(m, data):
    k = data.draw(st.integers(1, m))
    seed = data.draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    # random point of the capped simplex: water-fill a Dirichlet draw
    pi = rng.dirichlet(np.ones(m)) * k
    for _ in range(50):
        over = pi > 1
        if not over.any():
            break
        excess = (pi[over] - 1).sum()
        pi[over] = 1
        room = ~over & (pi < 1)
        pi[room] += excess * pi[room] / pi[room].sum()
    pi = np.minimum(pi, 1)
    pi *= k / pi.sum()
    pi = np.minimum(pi, 1.0)
    if abs(pi.sum() - k) > 1e-6:
        return
    for _ in range(20):
        s = madow_sample(pi, rng, k=k)
        assert s.sum() == k
        assert set(np.unique(s)) <= {0, 1}


def test_madow_rows_sparse_and_seeded():
    frac = sp.csr_matrix(np.array([[0.5, 0.5, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0]]))
    a = madow_sample_rows(frac, make_rng(5))
    b = madow_sample_rows(frac, make_rng(5))
    assert (a != b).nnz == 0
    assert list(np.diff(a.indptr)) == [2, 2]
    np.testing.assert_array_equal(a[1].toarray().ravel(), [0, 1, 0, 1])


# -- randomized prediction --------------------------------------------------------


def _two_component_classifier():
    h1 = AffineTopK(np.ones(3), np.array([0.0, 0.0, 0.0]), 1)
    h2 = AffineTopK(np.ones(3), np.array([0.0, 1.0, 0.0]), 1)
    return RandomizedClassifier((h1, h2), np.array([0.5, 0.5]))


def test_predict_randomized_single_component():
    h = AffineTopK(np.array([1.0, 2.0, 3.0]), np.zeros(3), 2)
    r = RandomizedClassifier((h,), np.array([1.0]))
    eta = np.array([0.9, 0.3, 0.2])
    for seed in range(5):
        np.testing.assert_array_equal(predict_randomized(r, eta, seed), predict_deterministic(h, eta))


def test_predict_randomized_frequencies():
    r = _two_component_classifier()
    eta = np.array([0.9, 0.3, 0.2])
    rng = make_rng(7)
    hits = sum(int(predict_randomized(r, eta, rng)[0]) for _ in range(20_000))
    assert abs(hits / 20_000 - 0.5) <= 0.015
    X = np.tile(eta, (100_000, 1))
    P = predict_randomized_batch(r, X, make_rng(8))
    assert abs(float(P[:, 0].sum()) / 100_000 - 0.5) <= 0.01


def test_predict_randomized_equal_components_ignore_rng():
    h = AffineTopK(np.ones(3), np.zeros(3), 1)
    r = RandomizedClassifier((h, h, h), np.array([0.2, 0.3, 0.5]))
    eta = np.array([0.1, 0.8, 0.3])
    outs = {tuple(predict_randomized(r, eta, s)) for s in range(20)}
    assert outs == {(0, 1, 0)}


def test_randomized_classifier_validation():
    h = AffineTopK(np.ones(3), np.zeros(3), 1)
    with pytest.raises(InvalidClassifierError):
        RandomizedClassifier((), np.array([]))
    with pytest.raises(InvalidClassifierError):
        RandomizedClassifier((h, h), np.array([0.5, 0.6]))
    with pytest.raises(InvalidClassifierError):
        RandomizedClassifier((h, AffineTopK(np.ones(3), np.zeros(3), 2)), np.array([0.5, 0.5]))
    with pytest.raises(InvalidClassifierError):
        predict_randomized("not a classifier", np.ones(3) / 3)


def test_randomized_marginals_rows_sum_to_k(rng):
    r = _two_component_classifier()
    F = randomized_marginals(r, rng.random((20, 3)))
    np.testing.assert_allclose(np.asarray(F.sum(axis=1)).ravel(), 1.0)


# -- confusion tensors ---------------------------------------------------------------


def test_empirical_confusion_single_instance():
    C = empirical_confusion(np.array([[1, 0]]), np.array([[1, 0]]))
    np.testing.assert_array_equal(C.matrices[0], [[0, 0], [0, 1]])
    np.testing.assert_array_equal(C.matrices[1], [[1, 0], [0, 0]])


def test_empirical_confusion_hand_count():
    C = empirical_confusion(np.array([[1, 0], [0, 1]]), sp.csr_matrix(np.array([[1, 1], [0, 0]])))
    np.testing.assert_allclose(C.matrices[0], [[0.5, 0], [0, 0.5]])
    np.testing.assert_allclose(C.matrices[1], [[0, 0.5], [0.5, 0]])


def test_empirical_confusion_no_positive_labels(rng):
    P = predictions_from_indices([rng.choice(6, 2, replace=False) for _ in range(10)], 6)
    C = empirical_confusion(P, sp.csr_matrix((10, 6)))
    assert np.all(C.tp == 0) and np.all(C.fn == 0)


def test_empirical_confusion_budget_violation():
    with pytest.raises(BudgetViolationError):
        empirical_confusion(np.array([[1, 0, 0], [1, 1, 0]]), np.zeros((2, 3)))


def _loop_confusion(pred, y, w):
    n, m = pred.shape
    c = np.zeros((m, 2, 2))
    for i in range(n):
        for j in range(m):
            # fractional h and soft y: expectation of the indicator products
            c[j, 0, 0] += w[i] * (1 - y[i, j]) * (1 - pred[i, j])
            c[j, 0, 1] += w[i] * (1 - y[i, j]) * pred[i, j]
            c[j, 1, 0] += w[i] * y[i, j] * (1 - pred[i, j])
            c[j, 1, 1] += w[i] * y[i, j] * pred[i, j]
    return c / w.sum()


def test_empirical_confusion_matches_loop_and_budget_identity(rng):
    n, m, k = 40, 7, 3
    P = predictions_from_indices([rng.choice(m, k, replace=False) for _ in range(n)], m)
    Y = (rng.random((n, m)) < 0.3).astype(float)
    C = empirical_confusion(P, sp.csr_matrix(Y))
    np.testing.assert_allclose(C.matrices, _loop_confusion(P.toarray(), Y, np.ones(n)), atol=1e-12)
    np.testing.assert_allclose(C.matrices.sum(axis=(1, 2)), 1.0)
    assert C.budget_gap() < 1e-12 * n


def test_confusion_partition_merge(rng):
    n, m, k = 101, 6, 2
    P = predictions_from_indices([rng.choice(m, k, replace=False) for _ in range(n)], m)
    Y = sp.csr_matrix((rng.random((n, m)) < 0.4).astype(float))
    whole, total = confusion_counts(P, Y)
    for cuts in ([50], [10, 60, 99], [1]):
        parts = np.split(np.arange(n), cuts)
        acc, tot = np.zeros((m, 2, 2)), 0.0
        for idx in reversed(parts):
            c, t = confusion_counts(P[idx], Y[idx])
            acc += c
            tot += t
        np.testing.assert_allclose(acc / tot, whole / total, atol=1e-9)


def test_expected_confusion_randomized(rng):
    n, m, k = 30, 5, 2
    X = rng.random((n, m))
    Y = sp.csr_matrix((rng.random((n, m)) < 0.3).astype(float))
    comps = tuple(AffineTopK(rng.normal(size=m), rng.normal(size=m), k) for _ in range(3))
    single = RandomizedClassifier(comps[:1], np.array([1.0]))
    np.testing.assert_allclose(expected_confusion_randomized(single, X, Y).matrices,
                               empirical_confusion(predict_batch(comps[0], X), Y).matrices)
    half = RandomizedClassifier(comps[:2], np.array([0.5, 0.5]))
    avg = 0.5 * (empirical_confusion(predict_batch(comps[0], X), Y).matrices
                 + empirical_confusion(predict_batch(comps[1], X), Y).matrices)
    np.testing.assert_allclose(expected_confusion_randomized(half, X, Y).matrices, avg)
    w = rng.dirichlet(np.ones(3))
    mix = RandomizedClassifier(comps, w)
    brute = sum(wi * _loop_confusion(predict_batch(c, X).toarray(), Y.toarray(), np.ones(n))
                for wi, c in zip(w, comps))
    np.testing.assert_allclose(expected_confusion_randomized(mix, X, Y).matrices, brute, atol=1e-12)


def test_population_confusion_discrete(rng):
    dist = DiscreteDistribution([0.5, 0.5], [[1.0, 0.0], [1.0, 0.0]])
    C = population_confusion_discrete(np.array([[1, 0], [1, 0]]), dist)
    assert C.tp[0] == 1.0
    for _ in range(10):
        n, m, k = 3, 4, 2
        w = rng.dirichlet(np.ones(n))
        eta = rng.random((n, m))
        dist = DiscreteDistribution(w, eta)
        # fractional assignment in the budget simplex
        h = np.array([madow_frac for madow_frac in
                      (np.full(m, k / m), np.array([1, 1, 0, 0.0]), np.array([0.5, 0.5, 0.5, 0.5]))])
        C = population_confusion_discrete(h, dist)
        np.testing.assert_allclose(C.matrices, _loop_confusion(h, eta, w), atol=1e-12)


def test_population_confusion_rejects_bad_weights():
    class Bad:
        weights = np.array([0.5, 0.6])
        marginals = np.zeros((2, 2))

    with pytest.raises(InvalidDistributionError):
        population_confusion_discrete(np.array([[1, 0], [0, 1]]), Bad())


# -- types --------------------------------------------------------------------------


def test_binary_confusion_invariants():
    BinaryConfusion(0.25, 0.25, 0.25, 0.25)
    with pytest.raises(InvalidInputError):
        BinaryConfusion(0.5, 0.5, 0.5, 0.0)
    with pytest.raises(InvalidInputError):
        BinaryConfusion(-0.1, 0.6, 0.25, 0.25)


def test_confusion_tensor_budget_identity():
    ok = np.array([[[0, 0.5], [0, 0.5]], [[0, 0.5], [0, 0.5]]])
    assert ConfusionTensor(ok, 2).k == 2
    with pytest.raises(BudgetViolationError):
        ConfusionTensor(ok, 1)
    C = ConfusionTensor(ok, 2)
    assert C.matrices.flags.writeable is False
    assert C.mix(C, 0.3).budget_gap() < 1e-12


def test_make_rng_streams_are_reproducible_and_distinct():
    a = make_rng(3, stream=0).random(4)
    b = make_rng(3, stream=0).random(4)
    c = make_rng(3, stream=1).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    child = np.random.SeedSequence(3).spawn(2)[1]
    np.testing.assert_array_equal(c, np.random.default_rng(child).random(4))


def test_enumerated_predictions_budget_identity():
    m, k = 4, 2
    rows = list(itertools.combinations(range(m), k))
    P = predictions_from_indices(rows, m)
    Y = np.eye(len(rows), m)
    C = empirical_confusion(P, Y)
    assert C.budget_gap() < 1e-12


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 6), st.integers(6, 30), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_sparse_shortlist_path_matches_dense(n, m, k, seed):
    rng = np.random.default_rng(seed)
    X = np.round(rng.random((n, m)), 1) * (rng.random((n, m)) < rng.uniform(0, 0.25))
    a = rng.choice([-1.0, 0.0, 0.5, 1.0, 2.0], m)
    b = rng.choice([0.0, -0.5, 0.5, 1.0], m)
    clf = AffineTopK(a, b, k)
    S = sp.csr_matrix(X)
    assert (predict_batch(clf, S, chunk_rows=2) != predict_batch(clf, X)).nnz == 0


def test_sparse_path_with_explicit_zeros_and_unsorted_indices():
    # row 0 stores label 0 with value 0 and lists indices out of order
    S = sp.csr_matrix((np.array([0.9, 0.0]), np.array([5, 0]), np.array([0, 2])), shape=(1, 20))
    b = np.zeros(20)
    b[0] = 1.0
    clf = AffineTopK(-np.ones(20), b, 1)
    # label 0 scores -0 + 1 = 1 and wins; label 5 scores 0.1 - 0.9 < 0
    assert predict_batch(clf, S).indices.tolist() == [0]
    dense = S.toarray()
    assert (predict_batch(clf, S) != predict_batch(clf, dense)).nnz == 0


def test_madow_sample_many_matches_single_draws():
    pi = np.array([0.2, 0.9, 0.4, 0.5, 0.0, 1.0])
    many = madow_sample_many(pi, 50, make_rng(11))
    rng = make_rng(11)
    for row in many:
        assert tuple(np.flatnonzero(madow_sample(pi, rng))) == tuple(row)
    assert np.all(np.diff(many, axis=1) > 0)
