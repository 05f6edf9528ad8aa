"""CART decision trees and bagged random forests.

Splits minimize weighted Gini impurity over midpoint thresholds between
consecutive distinct sorted values; ties break on the lowest feature index,
then the lowest threshold. Leaves predict the majority class, ties going to
class 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TooFewRows
from ..ingest import EncodedMatrix
from .base import ModelSpec, TrainedModel


def gini_impurity(y: np.ndarray) -> float:
    """1 - sum of squared class proportions."""
    n = len(y)
    if n == 0:
        return 0.0
    p1 = float(np.sum(y)) / n
    return 1.0 - p1 * p1 - (1.0 - p1) * (1.0 - p1)


@dataclass
class TreeNode:
    prediction: int
    pos_fraction: float
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _best_split(X: np.ndarray, y: np.ndarray, candidates: np.ndarray):
    """Best (feature, threshold) by weighted Gini among candidate columns.

    Evaluates every candidate feature in one vectorized pass; returns None
    when no candidate admits a valid split (all values equal).
    """
    n = len(y)
    Xc = X[:, candidates]
    order = np.argsort(Xc, axis=0, kind="stable")
    xs = np.take_along_axis(Xc, order, axis=0)
    ys = y[order]
    prefix_pos = np.cumsum(ys, axis=0, dtype=np.float64)
    total_pos = prefix_pos[-1]

    left_n = np.arange(1, n, dtype=np.float64)[:, None]
    right_n = n - left_n
    lp = prefix_pos[:-1]
    rp = total_pos - lp
    gini_left = 1.0 - (lp / left_n) ** 2 - ((left_n - lp) / left_n) ** 2
    gini_right = 1.0 - (rp / right_n) ** 2 - ((right_n - rp) / right_n) ** 2
    weighted = (left_n * gini_left + right_n * gini_right) / n
    weighted[xs[1:] == xs[:-1]] = np.inf

    # Feature-major argmin implements the fixed-column-order tie-break.
    flat = int(np.argmin(weighted.T))
    j, i = divmod(flat, n - 1)
    if not np.isfinite(weighted[i, j]):
        return None
    return int(candidates[j]), float((xs[i, j] + xs[i + 1, j]) / 2.0)


def grow_cart(
    X: np.ndarray,
    y: np.ndarray,
    *,
    max_depth: int,
    min_samples_split: int,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
    depth: int = 0,
) -> TreeNode:
    """Recursive CART growth; ``max_features`` enables per-split subsampling."""
    n = len(y)
    pos = int(np.sum(y))
    node = TreeNode(prediction=1 if 2 * pos > n else 0, pos_fraction=pos / n)
    if depth >= max_depth or n < min_samples_split or pos == 0 or pos == n:
        return node
    if max_features is not None and max_features < X.shape[1]:
        candidates = np.sort(rng.choice(X.shape[1], size=max_features, replace=False))
    else:
        candidates = np.arange(X.shape[1])
    found = _best_split(X, y, candidates)
    if found is None:
        return node
    node.feature, node.threshold = found
    mask = X[:, node.feature] <= node.threshold
    common = dict(max_depth=max_depth, min_samples_split=min_samples_split,
                  max_features=max_features, rng=rng, depth=depth + 1)
    node.left = grow_cart(X[mask], y[mask], **common)
    node.right = grow_cart(X[~mask], y[~mask], **common)
    return node


def tree_predict(root: TreeNode, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Route all rows through the tree: (labels, leaf positive fractions)."""
    n = X.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    fractions = np.zeros(n, dtype=np.float64)
    stack = [(root, np.arange(n))]
    while stack:
        node, rows = stack.pop()
        if rows.size == 0:
            continue
        if node.is_leaf:
            labels[rows] = node.prediction
            fractions[rows] = node.pos_fraction
            continue
        mask = X[rows, node.feature] <= node.threshold
        stack.append((node.left, rows[mask]))
        stack.append((node.right, rows[~mask]))
    return labels, fractions


def tree_apply(root: TreeNode, X: np.ndarray) -> np.ndarray:
    """Leaf identity (python id) each row lands in; used for consistency checks."""
    n = X.shape[0]
    out = np.zeros(n, dtype=np.int64)
    stack = [(root, np.arange(n))]
    while stack:
        node, rows = stack.pop()
        if rows.size == 0:
            continue
        if node.is_leaf:
            out[rows] = id(node)
            continue
        mask = X[rows, node.feature] <= node.threshold
        stack.append((node.left, rows[mask]))
        stack.append((node.right, rows[~mask]))
    return out


def train_decision_tree(data: EncodedMatrix, spec: ModelSpec) -> TrainedModel:
    """Single CART fit at the configured depth/size stopping rules."""
    if data.n_rows < 2:
        raise TooFewRows("need at least 2 rows to grow a tree")
    p = spec.resolved()
    root = grow_cart(
        data.X, data.y, max_depth=p["max_depth"], min_samples_split=p["min_samples_split"]
    )
    return TrainedModel(
        family="dt", schema=data.feature_names, hyperparameters=p, weights=root
    )


def predict_decision_tree(model: TrainedModel, X: np.ndarray, threshold: float):
    labels, fractions = tree_predict(model.weights, X)
    return labels, fractions


@dataclass
class ForestWeights:
    trees: list[TreeNode]


def train_random_forest(data: EncodedMatrix, spec: ModelSpec) -> TrainedModel:
    """Bagged CART ensemble with per-split feature subsampling.

    Per-tree seeds are derived from the spec seed up front, so tree
    construction order (or parallel execution) cannot change the result.
    """
    if data.n_rows < 2:
        raise TooFewRows("need at least 2 rows to grow a forest")
    p = spec.resolved()
    n = data.n_rows
    max_features = (
        int(np.floor(np.sqrt(data.n_features))) if p["feature_subsample"] else None
    )
    seeds = np.random.SeedSequence(spec.seed & 0xFFFFFFFFFFFFFFFF).spawn(p["n_trees"])
    trees = []
    for tree_seed in seeds:
        rng = np.random.default_rng(tree_seed)
        idx = rng.integers(0, n, size=n) if p["bootstrap"] else np.arange(n)
        trees.append(
            grow_cart(
                data.X[idx],
                data.y[idx],
                max_depth=p["max_depth"],
                min_samples_split=p["min_samples_split"],
                max_features=max_features,
                rng=rng,
            )
        )
    return TrainedModel(
        family="rf", schema=data.feature_names, hyperparameters=p, weights=ForestWeights(trees)
    )


def predict_random_forest(model: TrainedModel, X: np.ndarray, threshold: float):
    trees = model.weights.trees
    votes = np.zeros(X.shape[0], dtype=np.int64)
    for root in trees:
        votes += tree_predict(root, X)[0]
    share = votes / len(trees)
    # Strict majority for class 1; an exact tie falls to class 0.
    return (2 * votes > len(trees)).astype(np.int64), share


# --- serialization ----------------------------------------------------------


def _node_to_json(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"prediction": node.prediction, "pos_fraction": node.pos_fraction}
    return {
        "prediction": node.prediction,
        "pos_fraction": node.pos_fraction,
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_json(node.left),
        "right": _node_to_json(node.right),
    }


def _node_from_json(doc: dict) -> TreeNode:
    node = TreeNode(prediction=int(doc["prediction"]), pos_fraction=float(doc["pos_fraction"]))
    if "feature" in doc:
        node.feature = int(doc["feature"])
        node.threshold = float(doc["threshold"])
        node.left = _node_from_json(doc["left"])
        node.right = _node_from_json(doc["right"])
    return node


def tree_weights_to_json(root: TreeNode) -> dict:
    return {"root": _node_to_json(root)}


def tree_weights_from_json(doc: dict) -> TreeNode:
    return _node_from_json(doc["root"])


def forest_weights_to_json(weights: ForestWeights) -> dict:
    return {"trees": [_node_to_json(t) for t in weights.trees]}


def forest_weights_from_json(doc: dict) -> ForestWeights:
    return ForestWeights(trees=[_node_from_json(t) for t in doc["trees"]])
