import numpy as np
import pytest

from salmap.forest import bootstrap_indices, predict, train_forest
from salmap.forest import ForestModel, RegressionTree


def toy_set(n=200, d=116, seed=0):
    """Separable 1-D problem hidden in a noisy 116-dim feature block."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=(n, d))
    xs = np.concatenate([rng.uniform(-10, -1, n // 2), rng.uniform(1, 10, n - n // 2)])
    rng.shuffle(xs)
    x[:, 7] = xs
    y = (xs > 0).astype(np.float64)
    return x, y


class TestTraining:
    def test_constant_labels(self):
        x, _ = toy_set(50)
        model = train_forest(x, np.ones(50), tree_count=10, seed=0)
        probe = x[:5]
        assert predict(model, probe) == pytest.approx(np.ones(5))

    def test_separable_toy(self):
        x, y = toy_set()
        model = train_forest(x, y, tree_count=200, seed=0)
        lo = np.full(116, 0.5)
        hi = np.full(116, 0.5)
        lo[7], hi[7] = -5.0, 5.0
        assert predict(model, lo) <= 0.1
        assert predict(model, hi) >= 0.9

    def test_training_points_recovered(self):
        x, y = toy_set()
        model = train_forest(x, y, tree_count=100, seed=1)
        assert np.mean((predict(model, x) - y) ** 2) <= 0.02

    def test_determinism(self):
        x, y = toy_set()
        m1 = train_forest(x, y, tree_count=20, seed=42)
        m2 = train_forest(x, y, tree_count=20, seed=42)
        probe = np.random.default_rng(1).uniform(-10, 10, size=(100, 116))
        assert np.array_equal(predict(m1, probe), predict(m2, probe))

    def test_too_few_rows(self):
        with pytest.raises(ValueError, match="at least 10"):
            train_forest(np.zeros((5, 4)), np.zeros(5))

    def test_non_finite_named(self):
        x, y = toy_set(20)
        x[13, 99] = np.nan
        with pytest.raises(ValueError, match="row 13, column 99"):
            train_forest(x, y)

    def test_label_range(self):
        x, _ = toy_set(20)
        with pytest.raises(ValueError):
            train_forest(x, np.full(20, 1.5))


class TestPrediction:
    def test_single_leaf(self):
        tree = RegressionTree(
            feature=np.array([-1], dtype=np.int32),
            threshold=np.zeros(1),
            left=np.array([-1], dtype=np.int32),
            right=np.array([-1], dtype=np.int32),
            value=np.array([0.3]),
        )
        model = ForestModel([tree], 4, 1, 0, 0.3, 0.3)
        assert predict(model, np.zeros(4)) == pytest.approx(0.3)

    def test_convex_combination_bound(self):
        x, y = toy_set()
        model = train_forest(x, y, tree_count=50, seed=3)
        probes = np.random.default_rng(2).uniform(-50, 50, size=(10_000, 116))
        out = predict(model, probes)
        assert out.min() >= y.min() and out.max() <= y.max()

    def test_dimension_mismatch(self):
        x, y = toy_set(20)
        model = train_forest(x, y, tree_count=2)
        with pytest.raises(ValueError):
            predict(model, np.zeros(7))

    def test_monotone_transform_invariance(self):
        # a monotone feature rescale keeps the split structure and leaf
        # values; only the (midpoint) thresholds move
        x, y = toy_set(100, seed=5)
        m1 = train_forest(x, y, tree_count=20, seed=7)
        x2 = x.copy()
        x2[:, 7] = np.exp(0.3 * x2[:, 7])
        m2 = train_forest(x2, y, tree_count=20, seed=7)
        for a, b in zip(m1.trees, m2.trees):
            assert np.array_equal(a.feature, b.feature)
            assert np.array_equal(a.left, b.left)
            assert np.array_equal(a.value, b.value)


class TestBootstrap:
    def test_oob_error_small(self):
        x, y = toy_set(300, seed=9)
        model = train_forest(x, y, tree_count=100, seed=11)
        n = x.shape[0]
        acc = np.zeros(n)
        cnt = np.zeros(n)
        from salmap.forest import _predict_tree

        for t, tree in enumerate(model.trees):
            inbag = np.zeros(n, dtype=bool)
            inbag[bootstrap_indices(11, t, n)] = True
            oob = ~inbag
            if oob.any():
                acc[oob] += _predict_tree(
                    tree.feature, tree.threshold, tree.left, tree.right, tree.value,
                    np.ascontiguousarray(x[oob]),
                )
                cnt[oob] += 1
        seen = cnt > 0
        mse = np.mean((acc[seen] / cnt[seen] - y[seen]) ** 2)
        assert mse <= 0.05

    def test_bootstrap_reproducible(self):
        a = bootstrap_indices(0, 3, 100)
        b = bootstrap_indices(0, 3, 100)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, bootstrap_indices(0, 4, 100))
