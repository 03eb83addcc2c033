"""CART regression trees grown with windowing, and a small forest of them.

The forest is used only to bracket the value of one response variable: each
tree routes a record by its known fields to a leaf, and the spread of the
leaf values (plus a margin) becomes the search interval for the GA.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .exceptions import ConfigError, DataError, ParseError, RoutingError
from .genetic import GeneBounds

MAGIC = "AEIMPUTE-FOREST 1"


@dataclass
class TreeNode:
    """Leaf when ``left`` is None; internal nodes keep their training mean too."""

    value: float
    count: int
    var: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def leaves(self):
        if self.is_leaf:
            yield self
        else:
            yield from self.left.leaves()
            yield from self.right.leaves()

    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + max(self.left.depth(), self.right.depth())

    def n_nodes(self) -> int:
        return 1 if self.is_leaf else 1 + self.left.n_nodes() + self.right.n_nodes()


@dataclass(frozen=True)
class TreeParams:
    response_index: int
    predictor_indices: tuple[int, ...]
    max_depth: int = 12
    min_leaf: int = 5

    def __post_init__(self):
        preds = tuple(int(i) for i in self.predictor_indices)
        if self.response_index in preds:
            raise ConfigError("the response cannot also be a predictor")
        if not preds:
            raise ConfigError("at least one predictor is required")
        if self.max_depth < 0 or self.min_leaf < 1:
            raise ConfigError("max_depth must be >= 0 and min_leaf >= 1")
        object.__setattr__(self, "predictor_indices", preds)

    @classmethod
    def for_response(cls, response_index: int, n_vars: int, **kw) -> "TreeParams":
        preds = tuple(i for i in range(n_vars) if i != response_index)
        return cls(response_index, preds, **kw)


@dataclass
class RegressionTree:
    root: TreeNode
    params: TreeParams
    window_rounds: int = 0
    window_indices: np.ndarray | None = field(default=None, repr=False)

    @property
    def window_size(self) -> int:
        return 0 if self.window_indices is None else int(self.window_indices.size)

    @property
    def response_index(self) -> int:
        return self.params.response_index

    @property
    def predictor_indices(self) -> tuple[int, ...]:
        return self.params.predictor_indices

    def predict(self, record) -> float:
        return predict(self, record)

    def predict_many(self, rows) -> np.ndarray:
        return np.array([predict(self, r) for r in np.atleast_2d(rows)])


@dataclass
class RegressionForest:
    trees: list[RegressionTree]

    def __post_init__(self):
        if not self.trees:
            raise ConfigError("a forest needs at least one tree")
        if len({t.response_index for t in self.trees}) != 1:
            raise ConfigError("all trees must share one response variable")

    @property
    def response_index(self) -> int:
        return self.trees[0].response_index

    def leaf_predictions(self, record) -> np.ndarray:
        return np.array([predict(t, record) for t in self.trees])


@dataclass(frozen=True)
class WindowConfig:
    initial_window_fraction: float = 0.2
    misfit_tolerance: float = 0.05
    max_rounds: int = 5

    def __post_init__(self):
        if not 0.0 < self.initial_window_fraction < 1.0:
            raise ConfigError("initial_window_fraction must lie in (0, 1)")
        if self.misfit_tolerance <= 0:
            raise ConfigError("misfit_tolerance must be positive")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be at least 1")


class Split(NamedTuple):
    var: int
    threshold: float
    sse: float


def _sse(y) -> float:
    if len(y) == 0:
        return 0.0
    c = y - y.mean()
    return float(c @ c)


def tie_tolerance(parent_sse: float) -> float:
    """SSE differences below this are treated as ties."""
    return 1e-12 * max(parent_sse, 1e-300) + 1e-15


def best_split(rows, response_index: int, predictor_indices: Sequence[int], min_leaf: int = 1):
    """Exhaustive SSE-minimizing split, or None when nothing reduces SSE.

    Candidate thresholds are midpoints between consecutive distinct values of
    each predictor. Near-equal SSEs are ties, resolved by lowest predictor
    index then lowest threshold.
    """
    rows = np.asarray(rows, dtype=float)
    n = rows.shape[0]
    if n < 2 or n < 2 * min_leaf:
        return None
    y = rows[:, response_index]
    if np.ptp(y) == 0:
        return None
    yc = y - y.mean()
    parent = float(yc @ yc)
    tol = tie_tolerance(parent)

    candidates = []  # (sse, var, threshold)
    for var in sorted(int(v) for v in predictor_indices):
        order = np.argsort(rows[:, var], kind="stable")
        x = rows[order, var]
        ys = yc[order]
        s1 = np.cumsum(ys)
        s2 = np.cumsum(ys * ys)
        pos = np.flatnonzero(x[1:] != x[:-1])  # split after index pos
        n_left = pos + 1
        ok = (n_left >= min_leaf) & (n - n_left >= min_leaf)
        pos, n_left = pos[ok], n_left[ok]
        if pos.size == 0:
            continue
        n_right = n - n_left
        left = s2[pos] - s1[pos] ** 2 / n_left
        sum_r = s1[-1] - s1[pos]
        right = (s2[-1] - s2[pos]) - sum_r ** 2 / n_right
        sse = np.maximum(left, 0.0) + np.maximum(right, 0.0)
        k = int(np.argmin(sse))
        # earliest position within tolerance of this variable's minimum
        k = int(np.flatnonzero(sse <= sse[k] + tol)[0])
        p = pos[k]
        thr = 0.5 * (x[p] + x[p + 1])
        if thr >= x[p + 1]:
            thr = x[p]
        left_rows = order[:p + 1]
        right_rows = order[p + 1:]
        exact = _sse(y[left_rows]) + _sse(y[right_rows])
        candidates.append((exact, var, float(thr)))

    if not candidates:
        return None
    lowest = min(c[0] for c in candidates)
    sse, var, thr = min(
        (c for c in candidates if c[0] <= lowest + tol), key=lambda c: (c[1], c[2])
    )
    if not sse < parent - tol:
        return None
    return Split(var, thr, sse)


def grow_tree(rows, params: TreeParams) -> RegressionTree:
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise DataError("cannot grow a tree from zero rows")
    if np.isnan(rows[:, list(params.predictor_indices) + [params.response_index]]).any():
        raise DataError("tree rows must be complete")
    return RegressionTree(_grow(rows, params, 0), params)


def _grow(rows, params: TreeParams, depth: int) -> TreeNode:
    y = rows[:, params.response_index]
    node = TreeNode(value=float(y.mean()), count=len(y))
    if depth >= params.max_depth:
        return node
    split = best_split(rows, params.response_index, params.predictor_indices, params.min_leaf)
    if split is None:
        return node
    mask = rows[:, split.var] <= split.threshold
    node.var, node.threshold = split.var, split.threshold
    node.left = _grow(rows[mask], params, depth + 1)
    node.right = _grow(rows[~mask], params, depth + 1)
    return node


def _route(node: TreeNode, record) -> TreeNode:
    while not node.is_leaf:
        v = record[node.var]
        if np.isnan(v):
            raise RoutingError(f"predictor {node.var} is missing but needed for routing")
        node = node.left if v <= node.threshold else node.right
    return node


def predict(tree: RegressionTree, record) -> float:
    return _route(tree.root, np.asarray(record, dtype=float)).value


def train_window(rows, params: TreeParams, window_cfg: WindowConfig = WindowConfig(), seed: int = 0):
    """Grow a tree on a random window, then regrow after adding misfit rows.

    Stops when every row outside the window is predicted within
    ``misfit_tolerance`` or after ``max_rounds`` regrowths.
    """
    rows = np.asarray(rows, dtype=float)
    n = rows.shape[0]
    if n < 10:
        raise DataError("windowing needs at least 10 rows")
    rng = np.random.default_rng(seed)
    size = min(n, max(1, int(round(window_cfg.initial_window_fraction * n))))
    in_window = np.zeros(n, dtype=bool)
    in_window[rng.choice(n, size=size, replace=False)] = True

    tree = grow_tree(rows[in_window], params)
    rounds = 0
    y = rows[:, params.response_index]
    while rounds < window_cfg.max_rounds:
        outside = np.flatnonzero(~in_window)
        if outside.size == 0:
            break
        pred = tree.predict_many(rows[outside])
        misfit = outside[np.abs(pred - y[outside]) > window_cfg.misfit_tolerance]
        if misfit.size == 0:
            break
        in_window[misfit] = True
        tree = grow_tree(rows[in_window], params)
        rounds += 1
    tree.window_rounds = rounds
    tree.window_indices = np.flatnonzero(in_window)
    return tree


def train_forest(rows, response_index: int, n_trees: int = 4, params: TreeParams | None = None,
                 window_cfg: WindowConfig = WindowConfig(), seed: int = 0) -> RegressionForest:
    rows = np.asarray(rows, dtype=float)
    if n_trees < 1:
        raise ConfigError("n_trees must be at least 1")
    if params is None:
        params = TreeParams.for_response(response_index, rows.shape[1])
    elif params.response_index != response_index:
        raise ConfigError("params.response_index disagrees with response_index")
    trees = [train_window(rows, params, window_cfg, seed + t) for t in range(n_trees)]
    return RegressionForest(trees)


def bounds_from_predictions(predictions, margin: float = 0.05) -> GeneBounds:
    p = np.asarray(predictions, dtype=float)
    lo = float(np.clip(p.min() - margin, 0.0, 1.0))
    hi = float(np.clip(p.max() + margin, 0.0, 1.0))
    return GeneBounds([lo], [max(lo, hi)])


def derive_bounds(forest: RegressionForest, record, margin: float = 0.05) -> GeneBounds:
    """Search interval for the forest's response from every tree's leaf value."""
    return bounds_from_predictions(forest.leaf_predictions(record), margin)


def prune(tree: RegressionTree, validation_rows) -> RegressionTree:
    """Reduced-error pruning against held-out rows.

    Works bottom-up; a subtree becomes a leaf (its training mean) whenever
    that does not increase the validation SSE of the rows reaching it.
    """
    V = np.asarray(validation_rows, dtype=float)
    if V.ndim != 2 or V.shape[0] == 0:
        raise DataError("pruning needs validation rows")
    root = _prune(_copy_node(tree.root), V, tree.response_index)
    return replace(tree, root=root)


def _copy_node(node: TreeNode) -> TreeNode:
    if node.is_leaf:
        return TreeNode(node.value, node.count)
    return TreeNode(node.value, node.count, node.var, node.threshold,
                    _copy_node(node.left), _copy_node(node.right))


def _subtree_sse(node: TreeNode, V, response_index) -> float:
    if len(V) == 0:
        return 0.0
    pred = np.array([_route(node, r).value for r in V])
    r = V[:, response_index] - pred
    return float(r @ r)


def _prune(node: TreeNode, V, response_index) -> TreeNode:
    if node.is_leaf:
        return node
    mask = V[:, node.var] <= node.threshold
    node.left = _prune(node.left, V[mask], response_index)
    node.right = _prune(node.right, V[~mask], response_index)
    as_leaf = V[:, response_index] - node.value
    if float(as_leaf @ as_leaf) <= _subtree_sse(node, V, response_index):
        return TreeNode(node.value, node.count)
    return node


# --- file format ---------------------------------------------------------

def _dump_node(node: TreeNode, out: list[str]) -> None:
    if node.is_leaf:
        out.append(f"L {node.value:.17g} {node.count}")
    else:
        out.append(f"I {node.var} {node.threshold:.17g}")
        _dump_node(node.left, out)
        _dump_node(node.right, out)


def forest_to_text(forest: RegressionForest) -> str:
    lines = [MAGIC, f"response {forest.response_index} trees {len(forest.trees)}"]
    for t in forest.trees:
        p = t.params
        preds = ",".join(str(i) for i in p.predictor_indices)
        lines.append(f"tree max_depth {p.max_depth} min_leaf {p.min_leaf} predictors {preds} nodes {t.root.n_nodes()}")
        _dump_node(t.root, lines)
    return "\n".join(lines) + "\n"


def _load_node(lines, pos):
    parts = lines[pos].split()
    if parts[0] == "L" and len(parts) == 3:
        return TreeNode(float(parts[1]), int(parts[2])), pos + 1
    if parts[0] == "I" and len(parts) == 3:
        left, pos2 = _load_node(lines, pos + 1)
        right, pos3 = _load_node(lines, pos2)
        count = left.count + right.count
        value = (left.value * left.count + right.value * right.count) / count if count else 0.0
        return TreeNode(value, count, int(parts[1]), float(parts[2]), left, right), pos3
    raise ParseError(f"bad node record {lines[pos]!r}", pos + 1)


def forest_from_text(text: str) -> RegressionForest:
    lines = [l for l in text.splitlines() if l.strip()]
    if not lines or lines[0].strip() != MAGIC:
        raise ParseError(f"not a forest file (expected {MAGIC!r})", 1)
    try:
        head = lines[1].split()
        response, n_trees = int(head[1]), int(head[3])
        pos = 2
        trees = []
        for _ in range(n_trees):
            h = lines[pos].split()
            if h[0] != "tree":
                raise ParseError("expected a tree header", pos + 1)
            fields = dict(zip(h[1::2], h[2::2]))
            params = TreeParams(
                response,
                tuple(int(i) for i in fields["predictors"].split(",")),
                int(fields["max_depth"]),
                int(fields["min_leaf"]),
            )
            root, end = _load_node(lines, pos + 1)
            if end - pos - 1 != int(fields["nodes"]):
                raise ParseError("node count mismatch", pos + 1)
            trees.append(RegressionTree(root, params))
            pos = end
    except (IndexError, KeyError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"truncated or malformed forest file: {exc}") from None
    return RegressionForest(trees)


def save_forest(forest: RegressionForest, path) -> None:
    Path(path).write_text(forest_to_text(forest), encoding="utf-8")


def load_forest(path) -> RegressionForest:
    return forest_from_text(Path(path).read_text(encoding="utf-8"))
