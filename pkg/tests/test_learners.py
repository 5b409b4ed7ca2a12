import math

import numpy as np
import pytest

import oracles
from fallzone.errors import (
    DimensionMismatch,
    EmptyDataset,
    EmptyMatrix,
    EmptyNode,
    ModelFormatError,
    NoUsefulWeakLearner,
    TooFewRows,
)
from fallzone.learners import (
    BoostedEnsemble,
    ConfusionMatrix,
    Dataset,
    DecisionTree,
    ForestModel,
    adaboost_fit,
    adaboost_predict,
    adaboost_predict_batch,
    cm_accuracy,
    cross_validate,
    dumps_model,
    forest_fit,
    forest_predict,
    forest_predict_batch,
    gini,
    knn_fit,
    knn_predict,
    knn_predict_batch,
    loads_model,
    stratified_folds,
    tree_fit,
    tree_predict,
)
from fallzone.learners.boost import BoostTrace, samme_alpha
from fallzone.learners.tree import LEAF


def ds(X, y, K=None):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    return Dataset(X.reshape(len(y), -1), y, K or int(y.max()) + 1)


# -- kNN ------------------------------------------------------------------------------

def test_knn_identity_k1():
    data = ds([[0, 0], [1, 1], [5, 5]], [0, 1, 2])
    assert knn_predict(knn_fit(data, 1), [1, 1]) == 1


def test_knn_1d_majority():
    data = ds([[0], [1], [10]], [0, 0, 1])
    assert knn_predict(knn_fit(data, 3), [0.5]) == 0


def test_knn_vote_tie_goes_to_lowest_class():
    data = ds([[-1], [1]], [1, 0])
    assert knn_predict(knn_fit(data, 2), [0.0]) == 0


def test_knn_distance_tie_prefers_earlier_row():
    # equidistant rows at -1 (class 1, inserted first) and +1 (class 0)
    data = ds([[-1], [1]], [1, 0])
    assert knn_predict(knn_fit(data, 1), [0.0]) == 1


def test_knn_matches_oracle_on_integer_grids():
    rng = np.random.default_rng(11)
    for _ in range(50):
        n, d, K = int(rng.integers(1, 40)), int(rng.integers(1, 4)), int(rng.integers(2, 5))
        X = rng.integers(-2, 3, size=(n, d)).astype(float)
        y = rng.integers(0, K, size=n)
        k = int(rng.integers(1, n + 1))
        model = knn_fit(ds(X, y, K), k)
        Q = rng.integers(-2, 3, size=(10, d)).astype(float)
        got = knn_predict_batch(model, Q)
        want = [oracles.knn_label(X.tolist(), y.tolist(), k, q) for q in Q.tolist()]
        assert got.tolist() == want


def test_knn_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        knn_predict(knn_fit(ds([[0, 0]], [0], 2), 1), [1, 2, 3])


def test_knn_empty():
    with pytest.raises(EmptyDataset):
        knn_fit(Dataset(np.empty((0, 2)), np.empty(0, dtype=np.int64), 2), 1)


# -- gini and trees -------------------------------------------------------------------

@pytest.mark.parametrize("counts,expected", [([10, 0], 0.0), ([5, 5], 0.5), ([1, 1, 1, 1], 0.75)])
def test_gini(counts, expected):
    assert gini(counts) == pytest.approx(expected)
    assert gini(counts) == pytest.approx(oracles.gini(counts))


def test_gini_empty():
    with pytest.raises(EmptyNode):
        gini([0, 0])


def test_pure_data_single_leaf():
    t = tree_fit(ds([[1], [2], [3]], [1, 1, 1], 2))
    assert t.depth == 0 and t.feature[0] == LEAF


def test_separable_1d_depth_one():
    X = [[0], [1], [2], [10], [11], [12]]
    t = tree_fit(ds(X, [0, 0, 0, 1, 1, 1]), feature_subset_size=1)
    assert t.depth == 1
    assert t.threshold[0] == pytest.approx(6.0)  # midpoint of 2 and 10
    assert tree_predict(t, np.array(X, dtype=float)).tolist() == [0, 0, 0, 1, 1, 1]


def test_xor_depth_two():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    y = [0, 1, 1, 0]
    t = tree_fit(ds(X, y), max_depth=2, feature_subset_size=2)
    assert tree_predict(t, X).tolist() == y


def test_tree_respects_max_depth():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(80, 3))
    y = rng.integers(0, 3, 80)
    for depth in range(4):
        assert tree_fit(ds(X, y, 3), max_depth=depth).depth <= depth


# -- forests --------------------------------------------------------------------------

def _blobs(n=60, seed=0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 3
    X = rng.normal(size=(n, 2)) + np.array([[0, 0], [3, 0], [0, 3]])[y]
    return ds(X, y, 3)


def test_forest_single_tree_reduction():
    data = _blobs()
    f = forest_fit(data, n_trees=1, m=data.d, bootstrap=False, seed=5)
    t = tree_fit(data, feature_subset_size=data.d, rng_seed=5)
    g = np.stack(np.meshgrid(np.linspace(-3, 6, 10), np.linspace(-3, 6, 10)), -1).reshape(-1, 2)
    assert np.array_equal(forest_predict_batch(f, g)[0], tree_predict(t, g))


def test_forest_deterministic_bytes():
    data = _blobs()
    assert dumps_model(forest_fit(data, 15, seed=3)) == dumps_model(forest_fit(data, 15, seed=3))
    assert dumps_model(forest_fit(data, 15, seed=3)) != dumps_model(forest_fit(data, 15, seed=4))


def _stump(label, n_classes=2):
    return DecisionTree(np.array([LEAF]), np.array([0.0]), np.array([LEAF]), np.array([LEAF]),
                        np.array([label]), 1, n_classes)


def test_forest_majority_and_ties():
    f = ForestModel((_stump(0), _stump(0), _stump(1)), 1, 0)
    label, frac = forest_predict(f, [0.0])
    assert label == 0 and frac.tolist() == pytest.approx([2 / 3, 1 / 3])
    label, frac = forest_predict(ForestModel((_stump(1), _stump(0)), 1, 0), [0.0])
    assert label == 0 and frac.tolist() == [0.5, 0.5]
    label, frac = forest_predict(ForestModel((_stump(1), _stump(1)), 1, 0), [0.0])
    assert label == 1 and frac[1] == 1.0


def test_forest_equals_per_tree_majority():
    rng = np.random.default_rng(9)
    data = ds(rng.normal(size=(30, 4)), rng.integers(0, 3, 30), 3)
    f = forest_fit(data, 11, seed=1)
    Q = rng.normal(size=(25, 4))
    per_tree = np.stack([tree_predict(t, Q) for t in f.trees], axis=1)
    want = [oracles.majority(row) for row in per_tree.tolist()]
    assert forest_predict_batch(f, Q)[0].tolist() == want


def test_model_file_round_trip_and_checks():
    data = _blobs()
    f = forest_fit(data, 5, seed=2)
    blob = dumps_model(f)
    g = loads_model(blob, "forest", 2)
    assert dumps_model(g) == blob
    with pytest.raises(ModelFormatError):
        loads_model(blob, "boost")
    with pytest.raises(ModelFormatError):
        loads_model(blob, "forest", 3)
    with pytest.raises(ModelFormatError):
        loads_model(blob.replace(b'"version":1', b'"version":99'))


# -- boosting -------------------------------------------------------------------------

def test_samme_alpha():
    assert samme_alpha(0.25, 2) == pytest.approx(math.log(3))
    assert samme_alpha(0.5, 3) == pytest.approx(math.log(2))
    big = samme_alpha(0.0, 2)
    assert math.isfinite(big) and big == pytest.approx(math.log((1 - 1e-10) / 1e-10))


def _separable(n=200, seed=7):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    X = rng.normal(size=(n, 2)) * 0.8 + np.where(y[:, None] == 1, 2.0, -2.0)
    return ds(X, y, 2)


def test_boost_weight_and_alpha_contracts():
    trace = BoostTrace()
    model = adaboost_fit(_separable(), rounds=10, k_neighbors=5, seed=1, trace=trace)
    assert all(abs(s - 1.0) < 1e-12 for s in trace.weight_sums)
    assert all(a > 0 for a in model.alphas)


def test_perfect_learner_stops_early():
    data = ds([[0], [1], [10], [11]], [0, 0, 1, 1])
    model = adaboost_fit(data, rounds=10, k_neighbors=1, seed=0)
    assert len(model.alphas) == 1
    assert math.isfinite(model.alphas[0]) and model.alphas[0] > 20


def test_chance_learner_rejected():
    # labels independent of X and k=n: every weak learner predicts the majority
    # class of its resample, so weighted error is >= 1/2 = 1 - 1/K
    data = ds(np.zeros((6, 1)), [0, 1, 0, 1, 0, 1])
    with pytest.raises(NoUsefulWeakLearner):
        adaboost_fit(data, rounds=3, k_neighbors=6, seed=0)


def test_single_round_reduces_to_weak_learner():
    data = _blobs()
    model = adaboost_fit(data, rounds=1, k_neighbors=3, seed=4)
    weak, _ = model.rounds[0]
    Q = np.random.default_rng(1).normal(size=(40, 2)) * 3
    assert np.array_equal(adaboost_predict_batch(model, Q), knn_predict_batch(weak, Q))


def test_weighted_vote_arithmetic():
    # two constant weak learners: class 0 with alpha 2, class 1 with alpha 1
    X = np.array([[0.0], [1.0]])
    y = np.array([0, 1])
    model = BoostedEnsemble(X, y, 2, 1, (np.array([0]), np.array([1])), (2.0, 1.0))
    assert adaboost_predict(model, [5.0]) == 0
    model = BoostedEnsemble(X, y, 2, 1, (np.array([0]), np.array([1])), (1.0, 2.0))
    assert adaboost_predict(model, [5.0]) == 1


def test_boost_round_trip_bytes():
    model = adaboost_fit(_blobs(), rounds=4, seed=2)
    blob = dumps_model(model)
    assert dumps_model(loads_model(blob, "boost")) == blob


# -- evaluation -----------------------------------------------------------------------

def test_accuracy():
    assert cm_accuracy(ConfusionMatrix(np.diag([3, 4]))) == 1.0
    cm = ConfusionMatrix.from_predictions(np.array([0, 0, 1, 1]), np.array([0, 1, 1, 1]), 2)
    assert cm_accuracy(cm) == 0.75
    assert cm.precision().tolist() == pytest.approx([1.0, 2 / 3])
    assert cm.recall().tolist() == pytest.approx([0.5, 1.0])
    with pytest.raises(EmptyMatrix):
        cm_accuracy(ConfusionMatrix(np.zeros((2, 2), dtype=np.int64)))


def test_folds_of_ten():
    f = stratified_folds(np.zeros(10, dtype=int), 5, 0)
    assert np.bincount(f).tolist() == [2] * 5


def test_leave_one_out():
    f = stratified_folds(np.arange(7) % 2, 7, 0)
    assert sorted(f.tolist()) == list(range(7))


def test_stratified_sixty_forty():
    y = np.array([0] * 60 + [1] * 40)
    f = stratified_folds(y, 5, 3)
    for k in range(5):
        assert (np.sum((f == k) & (y == 0)), np.sum((f == k) & (y == 1))) == (12, 8)


def test_too_many_folds():
    with pytest.raises(TooFewRows):
        stratified_folds(np.zeros(3, dtype=int), 4, 0)


def test_cross_validate_counts_every_row_once():
    data = _blobs(45)
    cm = cross_validate(data, 5, lambda d: knn_fit(d, 3).predict, seed=0)
    assert cm.total == 45
    assert cm.counts.sum(axis=1).tolist() == [15, 15, 15]
