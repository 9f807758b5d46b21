from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from transferids.classical.base import Classifier, ClassifierKind
from transferids.classical.tree import TreeArrays, grow_tree


class RandomForest(Classifier):
    """Bagged CART trees with sqrt(d) candidate features per split.

    Each tree draws its bootstrap sample and feature subsets from its own
    generator spawned off ``seed``, so the forest is identical whatever
    ``n_jobs`` is. Class prediction is a majority vote of the trees (ties go to
    the lowest class id); probabilities average the trees' leaf frequencies.
    """

    kind = ClassifierKind.RandomForest

    @classmethod
    def defaults(cls):
        return {"n_trees": 100, "max_depth": None, "min_samples_split": 2, "max_features": "sqrt",
                "bootstrap": True, "n_jobs": 1}

    def _max_features(self, d: int) -> int:
        mf = self.hyper["max_features"]
        if mf == "sqrt":
            return max(1, int(math.sqrt(d)))
        if mf is None:
            return d
        return max(1, min(d, int(mf)))

    def _fit(self, X, y, n_classes):
        n, d = X.shape
        max_features = self._max_features(d)
        children = np.random.SeedSequence(self.seed).spawn(self.hyper["n_trees"])

        def grow(child):
            rng = np.random.default_rng(child)
            if self.hyper["bootstrap"]:
                idx = np.sort(rng.integers(0, n, size=n)).astype(np.int64)
            else:
                idx = np.arange(n, dtype=np.int64)
            return grow_tree(X, y, n_classes, idx, max_depth=self.hyper["max_depth"],
                             min_samples_split=self.hyper["min_samples_split"],
                             max_features=max_features, rng=rng)

        n_jobs = int(self.hyper["n_jobs"] or 1)
        if n_jobs > 1:
            with ThreadPoolExecutor(n_jobs) as pool:
                self.trees = list(pool.map(grow, children))
        else:
            self.trees = [grow(c) for c in children]
        self.info = {"n_trees": len(self.trees), "max_features": max_features,
                     "mean_nodes": float(np.mean([t.n_nodes for t in self.trees]))}

    def tree_votes(self, X) -> np.ndarray:
        return np.stack([t.predict(X) for t in self.trees], axis=1)

    def _predict(self, X):
        votes = self.tree_votes(X)
        counts = np.zeros((X.shape[0], self.n_classes), dtype=np.int64)
        for k in range(self.n_classes):
            counts[:, k] = (votes == k).sum(axis=1)
        return np.argmax(counts, axis=1)

    def _predict_proba(self, X):
        return np.mean([t.proba(X) for t in self.trees], axis=0)

    def _payload(self):
        arrays = {}
        for i, t in enumerate(self.trees):
            arrays.update(t.to_arrays(f"t{i}."))
        return {"n_trees": len(self.trees)}, arrays

    def _restore(self, meta, arrays):
        self.trees = [TreeArrays.from_arrays(arrays, f"t{i}.") for i in range(meta["n_trees"])]
