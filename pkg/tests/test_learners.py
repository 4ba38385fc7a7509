import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from astromls import learners
from astromls.dataset import LabeledDataset, Table, encode
from astromls.errors import ParameterError
from astromls.learners import (
    fit,
    fit_decision_tree,
    fit_knn,
    fit_lda,
    fit_naive_bayes,
    fit_random_forest,
    fit_svm,
)
from astromls.learners.svm import kkt_residuals, rbf_kernel, smo
from astromls.learners.tree import LEAF, best_split, gini
from astromls._util import make_rng

from conftest import gaussian_blobs


def random_dataset(seed, n=60, d=4, c=3, spread=1.5):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % c
    x = rng.normal(size=(n, d)) + spread * y[:, None] * rng.normal(size=d)
    return LabeledDataset.from_arrays(x, y, [f"k{i}" for i in range(c)])


# ---------------------------------------------------------------- oracles


def knn_oracle(train_x, train_y, queries, k):
    out = []
    for q in queries:
        dist = [(sum((a - b) ** 2 for a, b in zip(q, row)), i) for i, row in enumerate(train_x)]
        nearest = [i for _, i in sorted(dist)[:k]]
        votes = {}
        for i in nearest:
            votes[train_y[i]] = votes.get(train_y[i], 0) + 1
        top = max(votes.values())
        out.append(next(train_y[i] for i in nearest if votes[train_y[i]] == top))
    return np.array(out)


def exhaustive_root_split(x, y, c):
    """Best (feature, threshold) by exact rational Gini decrease; ties go to
    the lowest feature, then the lowest threshold."""
    m = len(y)

    def g(labels):
        if not labels:
            return Fraction(0)
        return 1 - sum(Fraction(labels.count(k), len(labels)) ** 2 for k in range(c))

    ys = list(y)
    parent = g(ys)
    best = None
    for f in range(x.shape[1]):
        values = sorted(set(x[:, f].tolist()))
        for lo, hi in zip(values, values[1:]):
            t = (lo + hi) / 2.0
            left = [ys[i] for i in range(m) if x[i, f] <= t]
            right = [ys[i] for i in range(m) if x[i, f] > t]
            dec = parent - Fraction(len(left), m) * g(left) - Fraction(len(right), m) * g(right)
            if dec > 0 and (best is None or dec > best[2]):
                best = (f, t, dec)
    return best


def nb_log_posterior_oracle(x_train, y_train, queries, c, var_smoothing=1e-9):
    n, d = len(x_train), len(x_train[0])

    def pvar(col):
        mu = math.fsum(col) / len(col)
        return math.fsum((v - mu) ** 2 for v in col) / len(col)

    eps = var_smoothing * max(pvar([r[j] for r in x_train]) for j in range(d))
    out = []
    for q in queries:
        logs = []
        for k in range(c):
            rows = [r for r, lab in zip(x_train, y_train) if lab == k]
            total = math.log(len(rows) / n)
            for j in range(d):
                col = [r[j] for r in rows]
                mu = math.fsum(col) / len(col)
                var = pvar(col) + eps
                total += -0.5 * math.log(2 * math.pi * var) - (q[j] - mu) ** 2 / (2 * var)
            logs.append(total)
        top = max(logs)
        norm = top + math.log(math.fsum(math.exp(v - top) for v in logs))
        out.append([v - norm for v in logs])
    return np.array(out)


# ---------------------------------------------------------------- KNN


def test_knn_matches_exhaustive_scan():
    data = random_dataset(11, n=80, d=3)
    queries = np.random.default_rng(12).normal(size=(100, 3)) * 2
    for k in (1, 3, 4, 7):
        m = fit_knn(data, k=k)
        expected = knn_oracle(data.x.tolist(), data.labels.tolist(), queries.tolist(), k)
        np.testing.assert_array_equal(m.predict(queries), expected)


def test_knn_identity_and_tie_rules():
    data = random_dataset(3)
    np.testing.assert_array_equal(fit_knn(data, k=1).predict(data.features), data.labels)
    # equidistant rows: the lower index is nearer
    tie = LabeledDataset.from_arrays([[-1.0], [1.0]], [1, 0])
    assert fit_knn(tie, k=1).predict([[0.0]]).tolist() == [1]
    # vote tie: class of the nearest member wins, even if its index is higher
    vt = LabeledDataset.from_arrays([[0.0], [5.0], [0.5], [5.5]], [0, 1, 0, 1])
    assert fit_knn(vt, k=4).predict([[4.0]]).tolist() == [1]
    np.testing.assert_array_equal(fit_knn(vt, k=4).predict_scores([[4.0]]), [[0.5, 0.5]])


def test_knn_stores_training_data_and_checks_k():
    data = random_dataset(4)
    m = fit_knn(data, k=3)
    np.testing.assert_array_equal(m.train_x, data.x)
    np.testing.assert_array_equal(m.train_y, data.labels)
    with pytest.raises(ParameterError):
        fit_knn(data, k=data.n_rows + 1)


# ---------------------------------------------------------------- decision tree


def test_tree_root_split_matches_exhaustive_enumeration():
    rng = np.random.default_rng(25)
    for _ in range(25):
        m = int(rng.integers(4, 21))
        d = int(rng.integers(1, 5))
        c = int(rng.integers(2, 4))
        x = rng.integers(0, 6, size=(m, d)).astype(float)
        y = rng.integers(0, c, size=m)
        got = best_split(x, y, c)
        want = exhaustive_root_split(x, y, c)
        if want is None:
            assert got is None
        else:
            assert got[:2] == want[:2]
            assert abs(got[2] - float(want[2])) < 1e-12


def test_tree_one_dimensional_example():
    data = LabeledDataset.from_arrays([[1.0], [2.0], [8.0], [9.0]], [0, 0, 1, 1], ["A", "B"])
    tree = fit_decision_tree(data).tree
    assert tree.feature[0] == 0 and tree.threshold[0] == 5.0
    for child in (tree.left[0], tree.right[0]):
        assert gini(tree.counts[child]) == 0.0


def test_tree_pure_data_is_a_single_leaf():
    data = LabeledDataset.from_arrays(np.random.default_rng(0).normal(size=(8, 2)), [1] * 8, ["a", "b"])
    m = fit_decision_tree(data)
    assert m.tree.n_nodes == 1 and m.tree.feature[0] == LEAF
    np.testing.assert_array_equal(m.predict_scores(np.zeros((2, 2))), [[0.0, 1.0], [0.0, 1.0]])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 60), st.integers(1, 4), st.integers(2, 4))
def test_tree_structure_invariants(seed, n, d, c):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    y = rng.integers(0, c, n)
    data = LabeledDataset.from_arrays(x, y, [str(k) for k in range(c)])
    m = fit_decision_tree(data)
    t = m.tree
    # distinct rows: unlimited depth fits the training set
    np.testing.assert_array_equal(m.predict(x), y)
    leaves = t.apply(x)
    for node in range(t.n_nodes):
        if t.feature[node] == LEAF:
            routed = y[leaves == node]
            np.testing.assert_array_equal(t.counts[node], np.bincount(routed, minlength=c))
        else:
            assert t.gain[node] > 0


def test_tree_stops_on_duplicate_points_with_mixed_labels():
    data = LabeledDataset.from_arrays([[1.0], [1.0], [2.0]], [0, 1, 1])
    m = fit_decision_tree(data)
    assert m.predict([[2.0]]).tolist() == [1]
    assert m.predict_scores([[1.0]]).tolist() == [[0.5, 0.5]]


# ---------------------------------------------------------------- random forest


def test_forest_of_one_unbootstrapped_tree_equals_tree():
    data = random_dataset(8, n=80)
    queries = np.random.default_rng(9).normal(size=(300, 4)) * 3
    rf = fit_random_forest(data, trees=1, bootstrap=False)
    dt = fit_decision_tree(data)
    np.testing.assert_array_equal(rf.predict(queries), dt.predict(queries))


def test_forest_bootstrap_and_determinism():
    data = random_dataset(10, n=50)
    a = fit_random_forest(data, seed=3)
    b = fit_random_forest(data, seed=3)
    assert len(a.trees) == 10
    assert learners.dumps(a) == learners.dumps(b)
    # each tree sees n draws
    for t in a.trees:
        assert t.tree.counts[0].sum() == data.n_rows
    roots = {t.tree.counts[0].tobytes() for t in a.trees}
    assert len(roots) > 1
    assert learners.dumps(fit_random_forest(data, seed=4)) != learners.dumps(a)


def test_forest_feature_subsampling_and_errors():
    data = random_dataset(12, n=40, d=9)
    m = fit_random_forest(data, max_features="sqrt", seed=1)
    assert m.predict(data.features).shape == (40,)
    with pytest.raises(ParameterError):
        fit_random_forest(data, trees=0)
    with pytest.raises(ParameterError):
        fit_random_forest(data, max_features=10)


# ---------------------------------------------------------------- naive Bayes


def test_nb_symmetric_example():
    data = LabeledDataset.from_arrays([[0.0], [2.0], [10.0], [12.0]], [0, 0, 1, 1], ["A", "B"])
    m = fit_naive_bayes(data)
    np.testing.assert_allclose(m.means[:, 0], [1.0, 11.0])
    assert m.predict([[1.0], [11.0]]).tolist() == [0, 1]


def test_nb_matches_log_domain_oracle():
    rng = np.random.default_rng(2)
    toys = [
        ([[1.0], [2.0], [10.0]], [0, 0, 1], [[1.5]]),
    ]
    for _ in range(6):
        n = int(rng.integers(3, 11))
        d = int(rng.integers(1, 4))
        y = np.arange(n) % 2
        y[: 2] = [0, 1]
        x = rng.normal(size=(n, d)) * 3
        toys.append((x.tolist(), y.tolist(), rng.normal(size=(4, d)).tolist()))
    for x, y, q in toys:
        data = LabeledDataset.from_arrays(x, y)
        m = fit_naive_bayes(data)
        want = nb_log_posterior_oracle(x, y, q, 2)
        np.testing.assert_allclose(m.log_posterior(q), want, atol=1e-10, rtol=0)


def test_nb_priors_and_variances():
    data = random_dataset(5, n=61)
    m = fit_naive_bayes(data)
    assert abs(np.exp(m.log_priors).sum() - 1.0) < 1e-12
    assert (m.variances > 0).all()
    np.testing.assert_allclose(m.predict_scores(data.features).sum(axis=1), 1.0, atol=1e-9)


def test_nb_scaling_a_column_keeps_predictions():
    for seed in range(30):
        data = random_dataset(100 + seed, n=40, d=3)
        queries = np.random.default_rng(seed).normal(size=(50, 3)) * 2
        factor = np.array([1.0, 10.0 ** (seed % 5 - 2), 1.0])
        base = fit_naive_bayes(data).predict(queries)
        scaled = LabeledDataset.from_arrays(data.x * factor, data.labels)
        np.testing.assert_array_equal(fit_naive_bayes(scaled).predict(queries * factor), base)


def test_nb_mixed_mode_tables():
    t = Table.from_columns({
        "size": [1.0, 1.2, 0.9, 5.0, 5.5, 4.8],
        "spec": ["G", "G", "K", "M", "M", "K"],
        "cls": ["a", "a", "a", "b", "b", "b"],
    })
    data = encode(t, "cls", dims=8)
    m = fit(learners.ALGORITHMS[0], data, {"mode": "mixed"})
    cats, logp = m.categorical_tables["spec"]
    probs = np.exp(logp)
    assert ((probs > 0) & (probs < 1)).all()
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    # class a: G twice, K once, M never; alpha = 1 over 3 categories
    np.testing.assert_allclose(probs[0], [3 / 6, 2 / 6, 1 / 6], atol=1e-12)
    assert m.predict(data.source).tolist() == data.labels.tolist()
    # an unseen category carries no evidence
    probe = Table.from_columns({"size": [1.0, 1.0], "spec": ["G", "X"]})
    unseen = m.joint_log_likelihood(probe)[1]
    only_size = fit_naive_bayes(encode(t.drop("spec"), "cls", dims=8), mode="mixed")
    np.testing.assert_allclose(unseen, only_size.joint_log_likelihood(Table.from_columns({"size": [1.0]}))[0])


def test_nb_errors():
    data = random_dataset(1)
    with pytest.raises(ParameterError):
        fit_naive_bayes(data, mode="bernoulli")
    with pytest.raises(ParameterError):
        fit_naive_bayes(data, mode="mixed")   # no source table


# ---------------------------------------------------------------- SVM


def _check_duals(model, data, c_penalty, tol):
    for mach in model.machines:
        i, j = mach.pair
        rows = np.flatnonzero((data.labels == i) | (data.labels == j))
        x = data.x[rows]
        y = np.where(data.labels[rows] == i, 1.0, -1.0)
        alphas = np.abs(mach.dual_coef)
        assert (alphas >= 0).all() and (alphas <= c_penalty).all()
        assert abs(mach.dual_coef.sum()) < 1e-8
        # rebuild the full multiplier vector from the stored support vectors
        full = np.zeros(rows.size)
        for sv, a in zip(mach.support_vectors, alphas):
            hit = np.flatnonzero((x == sv).all(axis=1))
            full[hit[0]] = a
        decision = mach.decision(x, model.gamma)
        np.testing.assert_allclose(
            decision, rbf_kernel(x, x, model.gamma) @ (full * y) + mach.bias, atol=1e-12
        )
        assert kkt_residuals(full, y, decision, c_penalty).max() <= tol


def test_svm_separable_toy_satisfies_kkt():
    data = LabeledDataset.from_arrays([[0, 0], [0, 1], [10, 10], [10, 11]], [0, 0, 1, 1])
    m = fit_svm(data, c=1.0)
    assert m.converged
    np.testing.assert_array_equal(m.predict(data.features), data.labels)
    _check_duals(m, data, 1.0, 1e-3)


@pytest.mark.parametrize("seed", range(5))
def test_svm_duals_on_separable_blobs(seed):
    data = gaussian_blobs(n=60, d=3, separation=6, seed=seed, classes=3)
    m = fit_svm(data, c=1.0, gamma=0.5, seed=seed)
    assert m.converged
    _check_duals(m, data, 1.0, 1e-3)


def test_smo_box_and_equality_constraints_hold_when_capped():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(40, 2))
    y = np.where(rng.random(40) < 0.5, 1.0, -1.0)   # pure noise, many bound multipliers
    res = smo(rbf_kernel(x, x, 1.0), y, 0.5, 1e-3, 3, make_rng(0))
    assert ((res.alphas >= 0) & (res.alphas <= 0.5)).all()
    assert abs(res.alphas @ y) < 1e-8
    assert res.passes <= 3


def test_svm_gamma_auto_and_params():
    data = random_dataset(2, d=4)
    m = fit_svm(data)
    assert m.gamma == 0.25
    assert m.params["gamma"] == 0.0 and m.params["coef0"] == 0.0 and m.params["kernel"] == "rbf"
    assert len(m.machines) == 3
    with pytest.raises(ParameterError):
        fit_svm(data, c=0.0)


def test_svm_absent_class_machine_votes_for_present_class():
    x = [[0.0], [0.1], [5.0], [5.1]]
    data = LabeledDataset.from_arrays(x, [0, 0, 2, 2], ["a", "b", "c"])
    m = fit_svm(data, gamma=1.0)
    np.testing.assert_array_equal(m.predict(x), [0, 0, 2, 2])
    assert not m.predict_scores(x)[:, 1].any()


# ---------------------------------------------------------------- LDA


def test_lda_whitening_and_pooled_covariance():
    data = random_dataset(21, n=90, d=4)
    m = fit_lda(data)
    w = m.whitening
    np.testing.assert_allclose(w @ m.regularized_covariance() @ w.T, np.eye(4), atol=1e-6)
    pooled = sum(
        np.cov(data.x[data.labels == k], rowvar=False, ddof=0) * (data.labels == k).sum()
        for k in range(3)
    ) / (data.n_rows - 3)
    np.testing.assert_allclose(m.regularized_covariance(), pooled, atol=1e-9)
    assert abs(np.exp(m.log_priors).sum() - 1.0) < 1e-12


def test_lda_midpoint_is_equidistant():
    data = gaussian_blobs(n=200, d=3, separation=4, seed=1)
    m = fit_lda(data)
    mid = m.class_means.mean(axis=0, keepdims=True)
    delta = m.discriminants(mid)[0]
    assert abs(delta[0] - delta[1]) < 1e-9


def test_lda_singular_covariance_is_floored():
    x = np.random.default_rng(0).normal(size=(6, 10))
    data = LabeledDataset.from_arrays(x, [0, 1, 0, 1, 0, 1])
    m = fit_lda(data)
    assert (m.eigenvalues > 0).all()
    w = m.whitening
    np.testing.assert_allclose(w @ m.regularized_covariance() @ w.T, np.eye(10), atol=1e-6)
    np.testing.assert_array_equal(m.predict(x), data.labels)


# ---------------------------------------------------------------- shared contract


@pytest.mark.parametrize("algo", learners.ALGORITHMS)
def test_scores_argmax_agrees_with_predict(algo):
    data = random_dataset(31, n=90, d=4, spread=1.0)
    queries = np.random.default_rng(32).normal(size=(500, 4)) * 2.5
    m = fit(algo, data, seed=1)
    pred = m.predict(queries)
    scores = m.predict_scores(queries)
    assert scores.shape == (500, 3)
    assert ((pred >= 0) & (pred < 3)).all()
    if algo == "knn":
        # vote ties use the nearest-member rule: predict is one of the tied maxima
        top = scores.max(axis=1)
        assert (scores[np.arange(500), pred] == top).all()
        unique = (scores == top[:, None]).sum(axis=1) == 1
        np.testing.assert_array_equal(pred[unique], scores[unique].argmax(axis=1))
    else:
        np.testing.assert_array_equal(pred, scores.argmax(axis=1))
    if algo in ("nb", "lda", "dt", "rf", "knn"):
        np.testing.assert_allclose(scores.sum(axis=1), 1.0, atol=1e-9)


@pytest.mark.parametrize("algo", learners.ALGORITHMS)
def test_json_round_trip_is_prediction_identical(algo):
    data = random_dataset(41, n=60, d=3)
    queries = np.random.default_rng(42).normal(size=(200, 3)) * 3
    m = fit(algo, data, seed=5)
    text = learners.dumps(m)
    back = learners.loads(text)
    assert type(back) is type(m)
    np.testing.assert_array_equal(back.predict(queries), m.predict(queries))
    np.testing.assert_array_equal(back.predict_scores(queries), m.predict_scores(queries))
    assert learners.dumps(back) == text
    assert learners.dumps(fit(algo, data, seed=5)) == text


def test_mixed_nb_round_trip():
    t = Table.from_columns({"v": [1.0, 2.0, 8.0, 9.0], "s": ["p", "q", "q", "r"], "y": ["a", "a", "b", "b"]})
    data = encode(t, "y", dims=4)
    m = fit("nb", data, {"mode": "mixed"})
    back = learners.loads(learners.dumps(m))
    np.testing.assert_array_equal(back.predict_scores(data.source), m.predict_scores(data.source))


@pytest.mark.parametrize("algo", learners.ALGORITHMS)
def test_predict_contract_errors_and_empty_input(algo):
    data = random_dataset(51, n=30, d=3)
    m = fit(algo, data)
    assert m.predict(np.zeros((0, 3))).shape == (0,)
    with pytest.raises(ParameterError):
        m.predict(np.zeros((2, 4)))


@pytest.mark.parametrize("algo", learners.ALGORITHMS)
def test_six_learners_fit_separated_blobs(algo):
    data = gaussian_blobs(n=200, seed=3)
    assert (fit(algo, data).predict(data.features) == data.labels).mean() == 1.0


def test_parameter_resolution():
    assert learners.resolve_params("knn") == {"k": 3}
    assert learners.resolve_params("rf", {"trees": 4})["trees"] == 4
    with pytest.raises(ParameterError):
        learners.resolve_params("knn", {"trees": 4})
    with pytest.raises(ParameterError):
        learners.resolve_params("ann")


def test_zero_feature_dataset_is_rejected():
    data = LabeledDataset.from_arrays(np.zeros((4, 0)), [0, 1, 0, 1])
    for algo in learners.ALGORITHMS:
        with pytest.raises(ParameterError):
            fit(algo, data)
