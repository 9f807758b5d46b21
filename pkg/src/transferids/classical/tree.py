"""CART decision tree (Gini impurity, midpoint thresholds)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from transferids import kernels
from transferids.classical.base import Classifier, ClassifierKind

LEAF = -1


@dataclass
class TreeArrays:
    """Flat tree: node ``i`` is a leaf when ``feature[i] == -1``; ``value`` holds class counts."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def apply(self, X: np.ndarray) -> np.ndarray:
        return kernels.tree_apply(X, self.feature, self.threshold, self.left, self.right)

    def proba(self, X: np.ndarray) -> np.ndarray:
        counts = self.value[self.apply(X)].astype(np.float64)
        return counts / counts.sum(axis=1, keepdims=True)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.value[self.apply(X)], axis=1)

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def to_arrays(self, prefix: str = "") -> dict[str, np.ndarray]:
        return {prefix + k: getattr(self, k) for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray], prefix: str = "") -> "TreeArrays":
        return cls(*(np.ascontiguousarray(arrays[prefix + k]) for k in ("feature", "threshold", "left", "right", "value")))


def grow_tree(X: np.ndarray, y: np.ndarray, n_classes: int, idx: np.ndarray | None = None,
              max_depth: int | None = None, min_samples_split: int = 2,
              max_features: int | None = None, rng: np.random.Generator | None = None) -> TreeArrays:
    """Grow a CART tree on rows ``idx`` of ``X``.

    A node splits whenever it is impure, has at least ``min_samples_split`` rows
    and some feature takes two distinct values in it, even if the best split
    leaves the impurity unchanged (XOR needs that).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    d = X.shape[1]
    if idx is None:
        idx = np.arange(X.shape[0], dtype=np.int64)
    all_features = np.arange(d, dtype=np.int64)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(rows):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(np.bincount(y[rows], minlength=n_classes))
        return len(feature) - 1

    stack = [(new_node(idx), np.ascontiguousarray(idx, dtype=np.int64), 0)]
    while stack:
        node, rows, depth = stack.pop()
        counts = value[node]
        if rows.size < min_samples_split or np.count_nonzero(counts) <= 1:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        if max_features is None or max_features >= d:
            f, t, _ = kernels.best_split(X, y, rows, all_features, n_classes)
        else:
            perm = rng.permutation(d).astype(np.int64)
            f, t, _ = kernels.best_split(X, y, rows, perm[:max_features], n_classes)
            if f == LEAF:
                # Sampled features were all constant here; fall back to the rest.
                f, t, _ = kernels.best_split(X, y, rows, np.ascontiguousarray(perm[max_features:]), n_classes)
        if f == LEAF:
            continue
        go_left = X[rows, f] <= t
        rows_l, rows_r = rows[go_left], rows[~go_left]
        feature[node], threshold[node] = f, t
        left[node] = new_node(rows_l)
        right[node] = new_node(rows_r)
        stack.append((right[node], rows_r, depth + 1))
        stack.append((left[node], rows_l, depth + 1))

    return TreeArrays(np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
                      np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                      np.array(value, dtype=np.int64).reshape(-1, n_classes))


class DecisionTree(Classifier):
    kind = ClassifierKind.DecisionTree

    @classmethod
    def defaults(cls):
        return {"max_depth": None, "min_samples_split": 2}

    def _fit(self, X, y, n_classes):
        self.tree = grow_tree(X, y, n_classes, max_depth=self.hyper["max_depth"],
                              min_samples_split=self.hyper["min_samples_split"])
        self.info = {"n_nodes": self.tree.n_nodes, "depth": self.tree.depth()}

    def _predict(self, X):
        return self.tree.predict(X)

    def _predict_proba(self, X):
        return self.tree.proba(X)

    def _payload(self):
        return {}, self.tree.to_arrays()

    def _restore(self, meta, arrays):
        self.tree = TreeArrays.from_arrays(arrays)
