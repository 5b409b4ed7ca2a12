"""CART decision trees (Gini impurity) and random forests."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ..errors import DimensionMismatch, EmptyDataset, EmptyNode, InvariantViolation
from ._rng import Seed, make_rng
from .data import Dataset

LEAF = -1
_BOOTSTRAP_STREAM = 0xB0


def gini(label_counts) -> float:
    counts = np.asarray(label_counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise EmptyNode("gini of an empty node")
    p = counts / total
    return float(1.0 - np.sum(p * p))


@dataclass(frozen=True)
class DecisionTree:
    """Flat pre-order node arrays.

    Internal node i routes x[feature[i]] <= threshold[i] to left[i], else to
    right[i]. Leaves have feature == -1 and carry ``value``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int
    n_classes: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depths[self.left[i]] = depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def predict(self, Q: np.ndarray) -> np.ndarray:
        return tree_predict(self, Q)


def _check_query(n_features: int, Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim == 1:
        Q = Q[None, :]
    if Q.shape[1] != n_features:
        raise DimensionMismatch(n_features, Q.shape[1])
    return Q


def tree_predict(tree: DecisionTree, Q) -> np.ndarray:
    Q = _check_query(tree.n_features, Q)
    node = np.zeros(Q.shape[0], dtype=np.int64)
    rows = np.arange(Q.shape[0])
    while True:
        feat = tree.feature[node]
        active = feat != LEAF
        if not active.any():
            break
        a = rows[active]
        go_left = Q[a, feat[active]] <= tree.threshold[node[active]]
        node[a] = np.where(go_left, tree.left[node[active]], tree.right[node[active]])
    return tree.value[node].astype(np.int64)


def _best_split(X: np.ndarray, y: np.ndarray, feats: np.ndarray, n_classes: int
                ) -> Tuple[float, int, float]:
    """Lowest weighted Gini over midpoint thresholds; (impurity, feature, threshold).

    Ties resolve to the lowest feature index, then the lowest threshold.
    """
    n = X.shape[0]
    xs = X[:, feats]
    order = np.argsort(xs, axis=0, kind="stable")
    xs = np.take_along_axis(xs, order, axis=0)
    ys = y[order]
    onehot = (ys[:, :, None] == np.arange(n_classes)).astype(np.float64)
    left = np.cumsum(onehot, axis=0)[:-1]
    right = left[-1:] + onehot[-1:] - left
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    g_left = n_left - np.sum(left * left, axis=2) / n_left
    g_right = n_right - np.sum(right * right, axis=2) / n_right
    weighted = (g_left + g_right) / n
    weighted[xs[:-1] >= xs[1:]] = np.inf
    flat = int(np.argmin(weighted.T))
    j, i = divmod(flat, n - 1)
    lo, hi = xs[i, j], xs[i + 1, j]
    thr = (lo + hi) / 2.0
    if thr >= hi:
        thr = lo
    return float(weighted[i, j]), int(feats[j]), float(thr)


def tree_fit(data: Dataset, max_depth: int = 12, feature_subset_size: Optional[int] = None,
             rng_seed: Seed = 0) -> DecisionTree:
    """Greedy CART fit on a seeded random feature subset per node."""
    if data.n == 0:
        raise EmptyDataset("cannot fit a tree on an empty dataset")
    d = data.d
    m = d if feature_subset_size is None else feature_subset_size
    if not 1 <= m <= d:
        raise InvariantViolation(f"feature subset size {m} outside [1, {d}]")
    rng = make_rng(rng_seed)
    K = data.n_classes
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[int] = []

    def grow(idx: np.ndarray, depth: int) -> int:
        node = len(feature)
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        y = data.y[idx]
        counts = np.bincount(y, minlength=K)
        value.append(int(np.argmax(counts)))
        if depth >= max_depth or np.count_nonzero(counts) == 1 or len(idx) < 2:
            return node
        feats = np.sort(rng.choice(d, size=m, replace=False))
        X = data.X[idx]
        impurity, f, thr = _best_split(X, y, feats, K)
        # impure nodes split even at zero gain (XOR needs it); only constant
        # features leave no split at all
        if not np.isfinite(impurity):
            return node
        go_left = X[:, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = grow(idx[go_left], depth + 1)
        right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(data.n), 0)
    return DecisionTree(
        np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
        np.array(value, dtype=np.int64), d, K,
    )


@dataclass(frozen=True)
class ForestModel:
    trees: Tuple[DecisionTree, ...]
    feature_subset_size: int
    seed: int

    def __post_init__(self) -> None:
        if not self.trees:
            raise InvariantViolation("forest has no trees")

    @property
    def n_features(self) -> int:
        return self.trees[0].n_features

    @property
    def n_classes(self) -> int:
        return self.trees[0].n_classes

    def predict(self, Q) -> np.ndarray:
        return forest_predict_batch(self, Q)[0]


def default_subset_size(d: int) -> int:
    return max(1, math.ceil(math.sqrt(d)))


def forest_fit(data: Dataset, n_trees: int = 100, max_depth: int = 12, m: Optional[int] = None,
               bootstrap: bool = True, seed: int = 0) -> ForestModel:
    """Tree t uses seed stream (seed, t); its bootstrap draw uses (seed, t, 0xB0)."""
    if n_trees < 1:
        raise InvariantViolation("n_trees must be >= 1")
    if data.n == 0:
        raise EmptyDataset("cannot fit a forest on an empty dataset")
    m = default_subset_size(data.d) if m is None else m
    trees = []
    for t in range(n_trees):
        sample = data
        if bootstrap:
            sample = data.subset(make_rng(seed, t, _BOOTSTRAP_STREAM).integers(0, data.n, data.n))
        trees.append(tree_fit(sample, max_depth, m, rng_seed=(seed, t)))
    return ForestModel(tuple(trees), m, seed)


def forest_votes(model: ForestModel, Q) -> np.ndarray:
    Q = _check_query(model.n_features, Q)
    votes = np.zeros((Q.shape[0], model.n_classes), dtype=np.int64)
    rows = np.arange(Q.shape[0])
    for tree in model.trees:
        np.add.at(votes, (rows, tree_predict(tree, Q)), 1)
    return votes


def forest_predict_batch(model: ForestModel, Q) -> Tuple[np.ndarray, np.ndarray]:
    votes = forest_votes(model, Q)
    return np.argmax(votes, axis=1), votes / len(model.trees)


def forest_predict(model: ForestModel, query) -> Tuple[int, np.ndarray]:
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1:
        raise DimensionMismatch(model.n_features, q.shape[-1] if q.ndim else 0)
    labels, fractions = forest_predict_batch(model, q)
    return int(labels[0]), fractions[0]
