import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import design_from_xy
from crashcount.errors import DataError
from crashcount.forest import (
    ForestModel,
    ForestParams,
    Tree,
    bootstrap_indices,
    estimator_sweep,
    evaluate,
    fit_forest,
    fit_tree,
    predict_forest,
    predict_forest_matrix,
    tree_rng,
)


def brute_force_root_split(x, y):
    """Enumerate every (feature, midpoint) split; return the best SSE drop.

    Ties resolve to the lowest feature index, then the lowest threshold,
    mirroring the documented tie rule.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    total = y.sum()
    n = y.size
    base = total * total / n
    best = None
    for f in range(x.shape[1]):
        values = np.unique(x[:, f])
        for a, b in zip(values[:-1], values[1:]):
            thr = 0.5 * (a + b)
            left = x[:, f] <= thr
            nl = int(left.sum())
            if nl == 0 or nl == n:
                continue
            sl = y[left].sum()
            sr = total - sl
            gain = sl * sl / nl + sr * sr / (n - nl) - base
            if best is None or gain > best[2] + 1e-12:
                best = (f, thr, gain)
    return best


def leaves(tree: Tree):
    return [i for i in range(tree.n_nodes) if tree.is_leaf(i)]


class TestFitTree:
    def test_pure_separation(self):
        design = design_from_xy([[0.0], [0.0], [1.0], [1.0]], [1, 1, 5, 5])
        tree = fit_tree(design)
        assert tree.feature[0] == 0
        assert tree.threshold[0] == 0.5
        np.testing.assert_allclose(tree.predict(np.array([[0.0], [1.0]])), [1.0, 5.0])

    def test_constant_response_single_leaf(self):
        design = design_from_xy([[0.0], [1.0], [0.0], [1.0]], [4, 4, 4, 4])
        tree = fit_tree(design)
        assert tree.n_nodes == 1
        assert tree.value[0] == 4.0

    def test_single_row_is_leaf(self):
        design = design_from_xy([[0.7]], [9])
        tree = fit_tree(design)
        assert tree.n_nodes == 1
        assert tree.value[0] == 9.0
        assert tree.count[0] == 1

    def test_root_split_matches_brute_force_binary(self):
        rng = np.random.default_rng(21)
        x = rng.integers(0, 2, size=(60, 5)).astype(float)
        y = rng.poisson(2 + 3 * x[:, 2])
        tree = fit_tree(design_from_xy(x, y), ForestParams(max_depth=1))
        f, thr, _ = brute_force_root_split(x, y)
        assert tree.feature[0] == f
        assert tree.threshold[0] == pytest.approx(thr)

    def test_root_split_matches_brute_force_continuous(self):
        rng = np.random.default_rng(22)
        x = np.column_stack([rng.normal(size=50), rng.normal(size=50)])
        y = rng.poisson(np.exp(1.0 + 0.8 * (x[:, 1] > 0)))
        tree = fit_tree(design_from_xy(x, y), ForestParams(max_depth=1))
        f, thr, _ = brute_force_root_split(x, y)
        assert tree.feature[0] == f
        assert tree.threshold[0] == pytest.approx(thr)

    def test_leaf_values_are_exact_means(self):
        rng = np.random.default_rng(23)
        x = rng.integers(0, 2, size=(200, 6)).astype(float)
        y = rng.poisson(3.0, size=200)
        design = design_from_xy(x, y)
        tree = fit_tree(design)
        pred = tree.predict(x)
        # group rows by leaf: prediction equals the group mean exactly
        for leaf_value in np.unique(pred):
            mask = pred == leaf_value
            assert abs(y[mask].mean() - leaf_value) <= 1e-12

    def test_min_samples_leaf_respected(self):
        rng = np.random.default_rng(24)
        x = rng.integers(0, 2, size=(100, 4)).astype(float)
        y = rng.poisson(2.0, size=100)
        tree = fit_tree(design_from_xy(x, y), ForestParams(min_samples_leaf=10))
        for i in leaves(tree):
            assert tree.count[i] >= 10

    def test_max_depth_zero_is_single_leaf(self):
        design = design_from_xy([[0.0], [1.0]], [1, 5])
        tree = fit_tree(design, ForestParams(max_depth=0))
        assert tree.n_nodes == 1


class TestFitForest:
    def _design(self, n=300, p=5, seed=0):
        rng = np.random.default_rng(seed)
        x = rng.integers(0, 2, size=(n, p)).astype(float)
        y = rng.poisson(np.exp(1.0 + 0.5 * x[:, 0] - 0.3 * x[:, 3]))
        return design_from_xy(x, y)

    def test_determinism_bitwise(self):
        design = self._design()
        a = fit_forest(design, ForestParams(n_estimators=5), seed=99)
        b = fit_forest(design, ForestParams(n_estimators=5), seed=99)
        assert np.array_equal(a.importance, b.importance)
        for ta, tb in zip(a.trees, b.trees):
            assert np.array_equal(ta.feature, tb.feature)
            assert np.array_equal(ta.threshold, tb.threshold)
            assert np.array_equal(ta.value, tb.value)
        x = design.x[:20]
        np.testing.assert_array_equal(
            predict_forest_matrix(a, x), predict_forest_matrix(b, x)
        )

    def test_single_tree_no_bootstrap_equals_tree(self):
        design = self._design()
        model = fit_forest(design, ForestParams(n_estimators=1), seed=4, bootstrap=False)
        tree = fit_tree(design, ForestParams(n_estimators=1), rng=tree_rng(4, 0))
        np.testing.assert_array_equal(
            predict_forest_matrix(model, design.x), tree.predict(design.x)
        )

    def test_constant_response_predicts_constant(self):
        design = design_from_xy(np.eye(6), [7] * 6)
        model = fit_forest(design, ForestParams(n_estimators=3), seed=0)
        np.testing.assert_allclose(predict_forest_matrix(model, design.x), 7.0)

    def test_bootstrap_unique_fraction(self):
        n = 500
        fractions = [
            len(np.unique(bootstrap_indices(123, t, n))) / n for t in range(1000)
        ]
        assert len(bootstrap_indices(123, 0, n)) == n
        assert abs(np.mean(fractions) - 0.632) <= 0.02

    def test_importance_normalized(self):
        model = fit_forest(self._design(), ForestParams(n_estimators=5), seed=1)
        assert model.importance.min() >= 0
        assert model.importance.sum() == pytest.approx(1.0, abs=1e-9)

    def test_importance_all_zero_when_no_splits(self):
        design = design_from_xy(np.eye(4), [3, 3, 3, 3])
        model = fit_forest(design, ForestParams(n_estimators=2), seed=0)
        assert np.all(model.importance == 0.0)

    def test_signal_feature_dominates_importance(self):
        rng = np.random.default_rng(17)
        n = 1000
        x = rng.integers(0, 2, size=(n, 6)).astype(float)
        y = rng.poisson(np.exp(1.0 + 1.2 * x[:, 4]))
        model = fit_forest(design_from_xy(x, y), ForestParams(n_estimators=10), seed=2)
        assert int(np.argmax(model.importance)) == 4

    def test_invalid_params(self):
        with pytest.raises(DataError):
            fit_forest(self._design(), ForestParams(n_estimators=0))
        with pytest.raises(DataError):
            fit_forest(self._design(), ForestParams(min_samples_leaf=0))
        with pytest.raises(DataError):
            fit_forest(self._design(n=50), ForestParams(mtry=9))

    def test_mtry_subsampling_still_deterministic(self):
        design = self._design()
        a = fit_forest(design, ForestParams(n_estimators=3, mtry=2), seed=5)
        b = fit_forest(design, ForestParams(n_estimators=3, mtry=2), seed=5)
        np.testing.assert_array_equal(
            predict_forest_matrix(a, design.x), predict_forest_matrix(b, design.x)
        )


class TestPredict:
    def test_mean_of_two_trees(self):
        leaf2 = Tree.from_dict({"value": 2.0, "n": 1})
        leaf4 = Tree.from_dict({"value": 4.0, "n": 1})
        model = ForestModel(
            trees=[leaf2, leaf4],
            params=ForestParams(n_estimators=2),
            seed=0,
            feature_names=("a",),
            importance=np.zeros(1),
        )
        assert predict_forest(model, np.array([0.0])) == 3.0

    def test_prediction_within_tree_bounds(self):
        rng = np.random.default_rng(9)
        x = rng.integers(0, 2, size=(200, 4)).astype(float)
        y = rng.poisson(4.0, size=200)
        model = fit_forest(design_from_xy(x, y), ForestParams(n_estimators=7), seed=3)
        probe = rng.integers(0, 2, size=(50, 4)).astype(float)
        per_tree = np.stack([t.predict(probe) for t in model.trees])
        combined = predict_forest_matrix(model, probe)
        assert np.all(combined >= per_tree.min(axis=0) - 1e-12)
        assert np.all(combined <= per_tree.max(axis=0) + 1e-12)

    def test_dimension_mismatch(self):
        model = fit_forest(design_from_xy(np.eye(3), [1, 2, 3]), ForestParams(n_estimators=1))
        with pytest.raises(DataError):
            predict_forest(model, np.zeros(5))


class TestEvaluate:
    def test_perfect_predictions(self):
        design = design_from_xy([[0.0], [1.0]], [2, 6])
        model = fit_forest(design, ForestParams(n_estimators=1), seed=0, bootstrap=False)
        ev = evaluate(model, design)
        assert ev.mae == 0.0
        assert ev.r2 == pytest.approx(1.0)

    def test_predicting_test_mean_gives_zero_r2(self):
        test = design_from_xy([[0.0], [1.0], [0.0], [1.0]], [1, 3, 5, 7])
        mean_leaf = Tree.from_dict({"value": 4.0, "n": 4})
        model = ForestModel(
            trees=[mean_leaf],
            params=ForestParams(n_estimators=1),
            seed=0,
            feature_names=("x0",),
            importance=np.zeros(1),
        )
        ev = evaluate(model, test)
        assert ev.r2 == pytest.approx(0.0, abs=1e-12)

    def test_constant_test_response_flags_r2(self):
        test = design_from_xy([[0.0], [1.0]], [4, 4])
        model = fit_forest(test, ForestParams(n_estimators=1), seed=0)
        ev = evaluate(model, test)
        assert not ev.r2_defined


class TestEstimatorSweep:
    def _design(self):
        rng = np.random.default_rng(31)
        n = 600
        x = rng.integers(0, 2, size=(n, 6)).astype(float)
        y = rng.poisson(np.exp(1.2 + 0.6 * x[:, 1] + 0.3 * x[:, 2]))
        return design_from_xy(x, y)

    def test_single_size_matches_direct_fit(self):
        from crashcount.features import split as split_design

        design = self._design()
        rows = estimator_sweep(design, [4], seed=11)
        train, test = split_design(design, 0.25, 11)
        model = fit_forest(train, ForestParams(n_estimators=4), seed=11)
        ev = evaluate(model, test)
        assert rows[0].n_trees == 4
        assert rows[0].mae == ev.mae
        assert rows[0].r2 == ev.r2

    def test_unsorted_sizes_rejected(self):
        with pytest.raises(DataError):
            estimator_sweep(self._design(), [10, 1], seed=0)

    def test_more_trees_do_not_hurt(self):
        rows = estimator_sweep(self._design(), [1, 10, 40], seed=8)
        assert rows[-1].mae <= rows[0].mae
        assert rows[-1].r2 >= rows[1].r2 - 0.01


class TestArtifactShape:
    def test_nested_dict_round_trip(self):
        rng = np.random.default_rng(41)
        x = rng.integers(0, 2, size=(100, 4)).astype(float)
        y = rng.poisson(3.0, size=100)
        tree = fit_tree(design_from_xy(x, y))
        rebuilt = Tree.from_dict(tree.as_dict())
        probe = rng.integers(0, 2, size=(40, 4)).astype(float)
        np.testing.assert_array_equal(tree.predict(probe), rebuilt.predict(probe))
