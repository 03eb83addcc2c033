import numpy as np
import pytest

from aeimpute.exceptions import ConfigError, DataError, ParseError, RoutingError
from aeimpute.forest import (
    RegressionForest, RegressionTree, TreeNode, TreeParams, WindowConfig, best_split,
    bounds_from_predictions, derive_bounds, forest_from_text, forest_to_text, grow_tree,
    predict, prune, train_forest, train_window,
)


def brute_force_split(rows, response, predictors, min_leaf=1):
    """Enumerate every (predictor, midpoint) and score it with plain loops."""
    y = rows[:, response]
    n = len(rows)

    def sse(values):
        if not values:
            return 0.0
        mean = sum(values) / len(values)
        return sum((v - mean) ** 2 for v in values)

    parent = sse(list(y))
    cands = []
    for var in sorted(predictors):
        xs = sorted(set(rows[:, var]))
        for a, b in zip(xs[:-1], xs[1:]):
            thr = (a + b) / 2
            left = [y[i] for i in range(n) if rows[i, var] <= thr]
            right = [y[i] for i in range(n) if rows[i, var] > thr]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue
            cands.append((sse(left) + sse(right), var, thr))
    if not cands:
        return None
    tol = 1e-12 * max(parent, 1e-300) + 1e-15
    low = min(c[0] for c in cands)
    s, var, thr = min((c for c in cands if c[0] <= low + tol), key=lambda c: (c[1], c[2]))
    if not s < parent - tol:
        return None
    return var, thr, s


def four_rows():
    return np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 10.0], [4.0, 10.0]])


PARAMS_4 = TreeParams(response_index=1, predictor_indices=(0,), max_depth=5, min_leaf=1)


class TestBestSplit:
    def test_four_rows(self):
        s = best_split(four_rows(), 1, [0])
        assert (s.var, s.threshold, s.sse) == (0, 2.5, 0.0)
        assert brute_force_split(four_rows(), 1, [0]) == (0, 2.5, 0.0)

    def test_constant_response(self):
        rows = four_rows()
        rows[:, 1] = 3.0
        assert best_split(rows, 1, [0]) is None

    def test_single_row(self):
        assert best_split(four_rows()[:1], 1, [0]) is None

    def test_min_leaf(self):
        s = best_split(four_rows(), 1, [0], min_leaf=3)
        assert s is None

    @pytest.mark.parametrize("seed", range(30))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 33))
        rows = rng.random((n, 4)) if seed % 2 else rng.integers(0, 4, (n, 4)).astype(float)
        got = best_split(rows, 3, [0, 1, 2], min_leaf=1 + seed % 3)
        want = brute_force_split(rows, 3, [0, 1, 2], min_leaf=1 + seed % 3)
        if want is None:
            assert got is None
        else:
            assert (got.var, got.threshold) == want[:2]
            assert abs(got.sse - want[2]) <= 1e-12


class TestGrowPredict:
    def test_constant_leaf(self):
        rows = np.column_stack([np.arange(10.0), np.full(10, 0.42)])
        tree = grow_tree(rows, PARAMS_4)
        assert tree.root.is_leaf and tree.root.value == pytest.approx(0.42)
        assert predict(tree, [123.0, np.nan]) == pytest.approx(0.42)

    def test_four_row_tree(self):
        tree = grow_tree(four_rows(), PARAMS_4)
        assert tree.root.depth() == 1
        assert [leaf.value for leaf in tree.root.leaves()] == [0.0, 10.0]
        assert predict(tree, [1.7, np.nan]) == 0.0
        assert predict(tree, [2.5, np.nan]) == 0.0
        assert predict(tree, [2.6, np.nan]) == 10.0

    def test_routing_error(self):
        tree = grow_tree(four_rows(), PARAMS_4)
        with pytest.raises(RoutingError):
            predict(tree, [np.nan, 0.0])

    def test_empty(self):
        with pytest.raises(DataError):
            grow_tree(np.empty((0, 2)), PARAMS_4)

    def test_response_not_predictor(self):
        with pytest.raises(ConfigError):
            TreeParams(1, (0, 1))

    def test_training_sse_not_worse_than_mean_and_depth_monotone(self):
        rng = np.random.default_rng(3)
        X = rng.random((200, 3))
        y = np.sin(6 * X[:, 0]) + 0.3 * X[:, 1] + 0.1 * rng.normal(size=200)
        rows = np.column_stack([X, y])
        base = float(np.sum((y - y.mean()) ** 2))
        prev = base
        for depth in range(0, 8):
            tree = grow_tree(rows, TreeParams(3, (0, 1, 2), max_depth=depth, min_leaf=3))
            assert tree.root.depth() <= depth
            sse = float(np.sum((tree.predict_many(rows) - y) ** 2))
            assert sse <= prev + 1e-12
            prev = sse
            assert all(leaf.count >= 3 for leaf in tree.root.leaves())
            assert sum(leaf.count for leaf in tree.root.leaves()) == 200
        assert prev < base


def staircase(n=200, seed=0):
    """Response is exactly representable by a depth-2 tree."""
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    y = np.where(X[:, 0] <= 0.5, np.where(X[:, 1] <= 0.5, 0.1, 0.3), np.where(X[:, 1] <= 0.5, 0.6, 0.9))
    return np.column_stack([X, y])


class TestWindow:
    params = TreeParams(2, (0, 1), max_depth=12, min_leaf=1)

    def test_terminates_without_misfits(self):
        rows = staircase()
        tree = train_window(rows, self.params, WindowConfig(0.2, 0.01, 10), seed=1)
        assert tree.window_rounds < 10
        assert tree.window_size < len(rows)
        assert np.all(np.abs(tree.predict_many(rows) - rows[:, 2]) <= 0.01)

    def test_max_rounds_cap(self):
        rng = np.random.default_rng(0)
        rows = rng.random((100, 3))
        tree = train_window(rows, self.params, WindowConfig(0.2, 0.01, 1), seed=0)
        assert tree.window_rounds == 1

    def test_full_window_equals_grow(self):
        rows = np.random.default_rng(2).random((40, 3))
        tree = train_window(rows, self.params, WindowConfig(0.999, 0.05, 3), seed=0)
        direct = grow_tree(rows, self.params)
        assert forest_to_text(RegressionForest([tree])) == forest_to_text(RegressionForest([direct]))

    @pytest.mark.parametrize("seed,rounds", [(3, 4), (4, 1), (5, 20)])
    def test_termination_contract(self, seed, rounds):
        rng = np.random.default_rng(seed)
        rows = rng.random((150, 3))
        rows[:, 2] = 0.5 * rows[:, 0] + 0.05 * rng.random(150)
        cfg = WindowConfig(0.2, 0.03, rounds)
        tree = train_window(rows, TreeParams(2, (0, 1), min_leaf=5), cfg, seed=seed)
        outside = np.setdiff1d(np.arange(150), tree.window_indices)
        resid = np.abs(tree.predict_many(rows[outside]) - rows[outside, 2])
        assert tree.window_rounds == rounds or np.all(resid <= cfg.misfit_tolerance)

    def test_too_few_rows(self):
        with pytest.raises(DataError):
            train_window(np.zeros((9, 3)), self.params)


class TestForest:
    def test_four_trees_distinct_windows(self):
        rows = np.random.default_rng(1).random((120, 4))
        f = train_forest(rows, 3, 4, seed=7)
        assert len(f.trees) == 4 and f.response_index == 3
        assert len({forest_to_text(RegressionForest([t])) for t in f.trees}) > 1

    def test_single_tree(self):
        rows = staircase()
        f = train_forest(rows, 2, 1, seed=0)
        rec = rows[0].copy()
        rec[2] = np.nan
        assert f.leaf_predictions(rec).tolist() == [predict(f.trees[0], rec)]

    def test_deterministic(self):
        rows = np.random.default_rng(1).random((120, 4))
        assert forest_to_text(train_forest(rows, 3, 4, seed=2)) == forest_to_text(train_forest(rows, 3, 4, seed=2))

    def test_shared_response(self):
        t1 = RegressionTree(TreeNode(0.1, 1), TreeParams(1, (0,)))
        t2 = RegressionTree(TreeNode(0.1, 1), TreeParams(0, (1,)))
        with pytest.raises(ConfigError):
            RegressionForest([t1, t2])
        with pytest.raises(ConfigError):
            RegressionForest([])


class TestBounds:
    def test_min_max(self):
        b = bounds_from_predictions(np.array([8, 10, 9, 12]) / 13, margin=0)
        assert (b.lo[0], b.hi[0]) == (8 / 13, 12 / 13)

    def test_agreement(self):
        b = bounds_from_predictions([0.4] * 4, margin=0)
        assert b.lo[0] == b.hi[0] == 0.4

    def test_clipped(self):
        b = bounds_from_predictions([0.0, 1.0], margin=0.05)
        assert (b.lo[0], b.hi[0]) == (0.0, 1.0)

    def test_derive_bounds_uses_every_tree(self):
        rows = staircase(seed=4)
        f = train_forest(rows, 2, 4, TreeParams(2, (0, 1), min_leaf=1), seed=0)
        rec = np.array([0.2, 0.8, np.nan])
        b = derive_bounds(f, rec, margin=0.05)
        preds = f.leaf_predictions(rec)
        assert b.lo[0] == pytest.approx(max(0, preds.min() - 0.05))
        assert b.hi[0] == pytest.approx(min(1, preds.max() + 0.05))
        assert 0 <= b.lo[0] <= b.hi[0] <= 1


class TestPrune:
    def test_leaf_unchanged(self):
        tree = RegressionTree(TreeNode(0.3, 4), TreeParams(1, (0,)))
        assert prune(tree, four_rows()).root.is_leaf

    def test_equal_leaves_collapse(self):
        root = TreeNode(0.5, 4, 0, 2.5, TreeNode(0.5, 2), TreeNode(0.5, 2))
        tree = RegressionTree(root, PARAMS_4)
        assert prune(tree, four_rows()).root.is_leaf

    def test_useful_split_kept(self):
        tree = grow_tree(four_rows(), PARAMS_4)
        assert not prune(tree, four_rows()).root.is_leaf

    def test_validation_sse_not_worse(self):
        rng = np.random.default_rng(8)
        def noisy(n):
            X = rng.random((n, 2))
            return np.column_stack([X, X[:, 0] + 0.3 * rng.normal(size=n)])
        train_rows, val_rows = noisy(300), noisy(150)
        tree = grow_tree(train_rows, TreeParams(2, (0, 1), min_leaf=1))
        pruned = prune(tree, val_rows)
        sse = lambda t: float(np.sum((t.predict_many(val_rows) - val_rows[:, 2]) ** 2))
        assert sse(pruned) <= sse(tree)
        assert pruned.root.n_nodes() < tree.root.n_nodes()
        assert tree.root.n_nodes() == grow_tree(train_rows, TreeParams(2, (0, 1), min_leaf=1)).root.n_nodes()

    def test_empty_validation(self):
        with pytest.raises(DataError):
            prune(grow_tree(four_rows(), PARAMS_4), np.empty((0, 2)))


class TestForestFile:
    def test_round_trip(self):
        rows = np.random.default_rng(3).random((80, 4))
        f = train_forest(rows, 3, 4, seed=1)
        text = forest_to_text(f)
        back = forest_from_text(text)
        assert forest_to_text(back) == text
        probe = rows[:10].copy()
        probe[:, 3] = np.nan
        for r in probe:
            assert np.array_equal(back.leaf_predictions(r), f.leaf_predictions(r))

    def test_format(self):
        tree = grow_tree(four_rows(), PARAMS_4)
        lines = forest_to_text(RegressionForest([tree])).splitlines()
        assert lines[1] == "response 1 trees 1"
        assert lines[3:] == ["I 0 2.5", "L 0 2", "L 10 2"]

    def test_malformed(self):
        with pytest.raises(ParseError):
            forest_from_text("nope")
        text = forest_to_text(RegressionForest([grow_tree(four_rows(), PARAMS_4)]))
        with pytest.raises(ParseError):
            forest_from_text(text.replace("L 10 2\n", ""))
