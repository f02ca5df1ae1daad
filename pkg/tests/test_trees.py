import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import best_split

from gpinow.errors import ConfigError
from gpinow.models import (
    Dataset,
    ForestModel,
    ForestParams,
    GbtParams,
    Tree,
    TreeParams,
    fit_decision_tree,
    fit_gbt,
    fit_random_forest,
    predict,
)
from gpinow.models.trees import TreeModel


def oracle_tree_predict(X, y, rows, depth, params, x):
    """Recursive CART built from the exhaustive split oracle, evaluated at x."""
    rows = np.asarray(rows)
    ys = y[rows]
    if (depth >= params.max_depth or len(rows) < params.min_samples_split
            or len(rows) < 2 * params.min_samples_leaf or np.ptp(ys) == 0):
        return ys.mean()
    split = best_split(X, y, rows, params.min_samples_leaf)
    if split is None or split[2] <= 0:
        return ys.mean()
    f, thr, _ = split
    side = rows[X[rows, f] <= thr] if x[f] <= thr else rows[X[rows, f] > thr]
    return oracle_tree_predict(X, y, side, depth + 1, params, x)


def check_structure(tree: Tree, n: int, params: TreeParams):
    assert tree.coverage[0] == n
    assert tree.depth() <= params.max_depth
    for nd in range(tree.n_nodes):
        if tree.is_leaf(nd):
            # a root leaf holds all n rows even when n < min_samples_leaf
            assert tree.coverage[nd] >= min(params.min_samples_leaf, n)
            assert tree.left[nd] == -1 and tree.right[nd] == -1
        else:
            lo, hi = tree.left[nd], tree.right[nd]
            assert 0 < lo < tree.n_nodes and 0 < hi < tree.n_nodes
            assert tree.coverage[lo] + tree.coverage[hi] == tree.coverage[nd]
    assert tree.coverage[tree.leaves()].sum() == n


class TestDecisionTree:
    def test_constant_target(self, rng):
        m = fit_decision_tree(Dataset(rng.normal(size=(20, 3)), np.full(20, 2.5)))
        assert m.tree.n_nodes == 1 and m.tree.value[0] == 2.5

    def test_step_function(self):
        x = np.arange(10.0)
        m = fit_decision_tree(Dataset(x[:, None], (x >= 5).astype(float)), TreeParams(max_depth=1))
        t = m.tree
        assert t.feature[0] == 0 and t.threshold[0] == 4.5
        assert t.value[t.left[0]] == 0.0 and t.value[t.right[0]] == 1.0

    def test_min_leaf_equal_n(self, rng):
        X, y = rng.normal(size=(12, 2)), rng.normal(size=12)
        m = fit_decision_tree(Dataset(X, y), TreeParams(min_samples_leaf=12))
        assert m.tree.n_nodes == 1
        assert m.tree.value[0] == pytest.approx(y.mean(), abs=1e-12)

    def test_single_leaf_model_predicts_constant(self):
        m = TreeModel(Tree.leaf(3.25), ("a",), TreeParams())
        np.testing.assert_array_equal(predict(m, [[1.0], [-7.0]]), [3.25, 3.25])

    def test_tie_goes_to_lowest_feature(self):
        X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
        m = fit_decision_tree(Dataset(X, np.array([0.0, 0.0, 1.0, 1.0])), TreeParams(max_depth=1))
        assert m.tree.feature[0] == 0

    @pytest.mark.parametrize("seed", range(8))
    @pytest.mark.parametrize("params", [TreeParams(3, 2, 1), TreeParams(4, 6, 2), TreeParams(2, 2, 3)])
    def test_matches_exhaustive_oracle(self, seed, params):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(30, 3))
        y = np.sin(X[:, 0]) + X[:, 1] ** 2 + 0.1 * rng.normal(size=30)
        m = fit_decision_tree(Dataset(X, y), params)
        probe = np.vstack([X, rng.normal(size=(10, 3))])
        expected = [oracle_tree_predict(X, y, np.arange(30), 0, params, x) for x in probe]
        np.testing.assert_allclose(m.predict_array(probe), expected, atol=1e-12)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 40), st.integers(1, 5),
           st.integers(0, 6), st.integers(2, 8), st.integers(1, 5), st.booleans())
    def test_structure_fuzz(self, seed, n, p, depth, min_split, min_leaf, discrete):
        rng = np.random.default_rng(seed)
        X = rng.integers(0, 4, size=(n, p)).astype(float) if discrete else rng.normal(size=(n, p))
        y = rng.normal(size=n)
        params = TreeParams(depth, min_split, min_leaf)
        m = fit_decision_tree(Dataset(X, y), params)
        check_structure(m.tree, n, params)
        for nd in m.tree.leaves():
            assert np.isfinite(m.tree.value[nd])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_row_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.integers(0, 5, size=(25, 3)).astype(float)
        y = rng.normal(size=25)
        perm = rng.permutation(25)
        a = fit_decision_tree(Dataset(X, y), TreeParams(4))
        b = fit_decision_tree(Dataset(X[perm], y[perm]), TreeParams(4))
        Xt = rng.integers(-1, 6, size=(20, 3)).astype(float)
        np.testing.assert_allclose(a.predict_array(Xt), b.predict_array(Xt), atol=1e-9)

    @pytest.mark.parametrize("kwargs", [{"max_depth": -1}, {"min_samples_split": 1}, {"min_samples_leaf": 0}])
    def test_bad_params(self, kwargs):
        with pytest.raises(ConfigError):
            TreeParams(**kwargs)


class TestForest:
    def test_mean_of_trees(self, rng):
        X, y = rng.normal(size=(40, 4)), rng.normal(size=40)
        m = fit_random_forest(Dataset(X, y), ForestParams(n_estimators=7, max_features=0.5, seed=3))
        Xt = rng.normal(size=(15, 4))
        per_tree = np.array([t.predict(Xt) for t in m.trees])
        np.testing.assert_allclose(m.predict_array(Xt), per_tree.mean(axis=0), atol=1e-12)

    def test_two_constant_trees(self):
        m = ForestModel((Tree.leaf(1.0), Tree.leaf(3.0)), ("a",), ForestParams(n_estimators=2))
        assert predict(m, [[0.0]])[0] == 2.0

    def test_seed_determinism(self, rng):
        d = Dataset(rng.normal(size=(30, 5)), rng.normal(size=30))
        p = ForestParams(n_estimators=10, max_features=2, seed=99)
        a, b = fit_random_forest(d, p), fit_random_forest(d, p)
        for s, t in zip(a.trees, b.trees):
            assert s.threshold.tobytes() == t.threshold.tobytes()
            assert s.value.tobytes() == t.value.tobytes()
        c = fit_random_forest(d, ForestParams(n_estimators=10, max_features=2, seed=100))
        assert any(s.value.tobytes() != t.value.tobytes() for s, t in zip(a.trees, c.trees))

    def test_row_permutation_invariance(self, rng):
        X, y = rng.normal(size=(30, 4)), rng.normal(size=30)
        perm = rng.permutation(30)
        p = ForestParams(n_estimators=15, max_features=0.5, seed=1)
        a = fit_random_forest(Dataset(X, y), p)
        b = fit_random_forest(Dataset(X[perm], y[perm]), p)
        Xt = rng.normal(size=(10, 4))
        np.testing.assert_array_equal(a.predict_array(Xt), b.predict_array(Xt))

    def test_forest_beats_single_tree(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(200, 5))
        y = X @ [1.0, -0.5, 0.3, 0.0, 0.0] + 0.5 * rng.normal(size=200)
        d, Xt, yt = Dataset(X[:150], y[:150]), X[150:], y[150:]
        one = fit_random_forest(d, ForestParams(n_estimators=1, seed=0))
        many = fit_random_forest(d, ForestParams(n_estimators=100, seed=0))
        rmse = lambda m: np.sqrt(np.mean((m.predict_array(Xt) - yt) ** 2))
        assert rmse(many) <= rmse(one)

    def test_integer_max_features_bound(self, rng):
        d = Dataset(rng.normal(size=(10, 3)), rng.normal(size=10))
        with pytest.raises(ConfigError):
            fit_random_forest(d, ForestParams(max_features=4))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(2, 30), st.integers(0, 5), st.integers(1, 4))
    def test_structure_fuzz(self, seed, n, depth, min_leaf):
        rng = np.random.default_rng(seed)
        X, y = rng.normal(size=(n, 3)), rng.normal(size=n)
        params = TreeParams(depth, 2, min_leaf)
        m = fit_random_forest(Dataset(X, y), ForestParams(params, n_estimators=3, max_features=2, seed=seed))
        for t in m.trees:
            check_structure(t, n, params)


class TestGbt:
    def test_depth_zero_single_round(self, rng):
        X, y = rng.normal(size=(20, 3)), rng.normal(size=20)
        m = fit_gbt(Dataset(X, y), GbtParams(n_estimators=1, max_depth=0, leaf_l2=0.0, learning_rate=1.0))
        np.testing.assert_allclose(m.predict_array(rng.normal(size=(5, 3))), y.mean(), atol=1e-12)

    def test_base_score_is_mean(self, rng):
        X, y = rng.normal(size=(20, 3)), rng.normal(size=20)
        assert fit_gbt(Dataset(X, y), GbtParams(n_estimators=2)).base_score == pytest.approx(y.mean())

    def test_exact_depth_two_target(self, rng):
        X = rng.normal(size=(40, 3))
        y = np.where(X[:, 0] <= 0.1, np.where(X[:, 1] <= -0.2, 1.0, 2.0),
                     np.where(X[:, 2] <= 0.5, 3.0, 5.0))
        m = fit_gbt(Dataset(X, y), GbtParams(n_estimators=3, max_depth=2, learning_rate=1.0, leaf_l2=0.0))
        fits = [np.sqrt(np.mean((s - y) ** 2)) for s in m.staged_predict(X)]
        assert min(fits) < 1e-9

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(0, 4), st.floats(0.05, 1.0))
    def test_monotone_training_loss(self, seed, depth, lr):
        rng = np.random.default_rng(seed)
        X = rng.integers(0, 6, size=(30, 4)).astype(float)
        y = rng.normal(size=30)
        m = fit_gbt(Dataset(X, y), GbtParams(n_estimators=25, max_depth=depth, learning_rate=lr,
                                             colsample_bytree=1.0, leaf_l2=0.0))
        losses = [np.sqrt(np.mean((y - m.base_score) ** 2))]
        losses += [np.sqrt(np.mean((s - y) ** 2)) for s in m.staged_predict(X)]
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_staged_matches_predict(self, rng):
        X, y = rng.normal(size=(25, 4)), rng.normal(size=25)
        m = fit_gbt(Dataset(X, y), GbtParams(n_estimators=12, colsample_bytree=0.5, seed=4))
        *_, last = m.staged_predict(X)
        np.testing.assert_array_equal(last, m.predict_array(X))

    def test_colsample_restricts_each_round(self, rng):
        X, y = rng.normal(size=(40, 10)), rng.normal(size=40)
        m = fit_gbt(Dataset(X, y), GbtParams(n_estimators=20, max_depth=3, colsample_bytree=0.3))
        for t in m.trees:
            assert len(t.used_features()) <= 3

    def test_prefix_rounds_are_shared(self, rng):
        d = Dataset(rng.normal(size=(30, 6)), rng.normal(size=30))
        short = fit_gbt(d, GbtParams(n_estimators=5, colsample_bytree=0.5, seed=11))
        long = fit_gbt(d, GbtParams(n_estimators=9, colsample_bytree=0.5, seed=11))
        for a, b in zip(short.trees, long.trees):
            assert a.threshold.tobytes() == b.threshold.tobytes()
            assert a.feature.tobytes() == b.feature.tobytes()

    def test_row_permutation_invariance(self, rng):
        X, y = rng.integers(0, 4, size=(30, 5)).astype(float), rng.normal(size=30)
        perm = rng.permutation(30)
        p = GbtParams(n_estimators=30, colsample_bytree=0.6, seed=2)
        a = fit_gbt(Dataset(X, y), p)
        b = fit_gbt(Dataset(X[perm], y[perm]), p)
        np.testing.assert_allclose(a.predict_array(X), b.predict_array(X), atol=1e-9)

    @pytest.mark.parametrize("kwargs", [{"learning_rate": 0.0}, {"learning_rate": 1.5},
                                        {"colsample_bytree": 0.0}, {"leaf_l2": -1.0}, {"n_estimators": 0}])
    def test_bad_params(self, kwargs):
        with pytest.raises(ConfigError):
            GbtParams(**kwargs)
