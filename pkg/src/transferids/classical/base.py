from __future__ import annotations

import enum
from typing import Any

import numpy as np

from transferids import container


class ClassifierKind(str, enum.Enum):
    SVM = "svm"
    DecisionTree = "dt"
    LogisticRegression = "lr"
    RandomForest = "rf"
    LDA = "lda"

    @classmethod
    def parse(cls, value) -> "ClassifierKind":
        if isinstance(value, cls):
            return value
        v = str(value).lower()
        for k in cls:
            if v in (k.value, k.name.lower()):
                return k
        raise ValueError(f"unknown classifier kind {value!r}")


class Classifier:
    """Shared contract of the five victims: ``fit`` / ``predict`` / ``predict_proba``."""

    kind: ClassifierKind

    def __init__(self, seed: int = 0, **hyper):
        self.seed = seed
        self.hyper = {**self.defaults(), **hyper}
        unknown = set(hyper) - set(self.defaults())
        if unknown:
            raise ValueError(f"{self.kind.value}: unknown hyperparameters {sorted(unknown)}")
        self.n_inputs: int | None = None
        self.class_names: tuple[str, ...] = ()
        self.schema_fingerprint: str | None = None
        self.info: dict[str, Any] = {}

    @classmethod
    def defaults(cls) -> dict[str, Any]:
        return {}

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def fit(self, X: np.ndarray, y: np.ndarray, class_names=None, schema_fingerprint=None):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError("X and y disagree in length")
        if X.shape[0] == 0:
            raise ValueError("cannot fit on an empty dataset")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain non-finite values")
        n_classes = len(class_names) if class_names is not None else int(y.max()) + 1
        if y.min() < 0 or y.max() >= n_classes:
            raise ValueError("labels fall outside the class range")
        if np.unique(y).size < 2:
            raise ValueError(f"{self.kind.value}: training data holds a single class")
        self.class_names = tuple(class_names) if class_names is not None else tuple(str(k) for k in range(n_classes))
        self.n_inputs = X.shape[1]
        self.schema_fingerprint = schema_fingerprint
        self._fit(X, y, n_classes)
        return self

    def fit_dataset(self, data):
        return self.fit(data.matrix, data.labels, data.class_names, data.schema_fingerprint)

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if self.n_inputs is None:
            raise RuntimeError(f"{self.kind.value} classifier is not fitted")
        if X.shape[1] != self.n_inputs:
            raise ValueError(f"expected {self.n_inputs} features, got {X.shape[1]}")
        return np.ascontiguousarray(X)

    def predict(self, X) -> np.ndarray:
        return self._predict(self._check(X))

    def predict_proba(self, X) -> np.ndarray:
        return self._predict_proba(self._check(X))

    # Subclasses implement these and the payload pair below.
    def _fit(self, X, y, n_classes): raise NotImplementedError
    def _predict(self, X): return np.argmax(self._predict_proba(X), axis=1)
    def _predict_proba(self, X): raise NotImplementedError
    def _payload(self) -> tuple[dict, dict[str, np.ndarray]]: raise NotImplementedError
    def _restore(self, meta: dict, arrays: dict[str, np.ndarray]) -> None: raise NotImplementedError

    @property
    def fingerprint(self) -> str:
        meta, arrays = self._payload()
        return container.fingerprint(self.kind.value, meta, *(arrays[k] for k in sorted(arrays)))

    def save(self, path) -> None:
        meta, arrays = self._payload()
        header = {"model": self.kind.value, "hyper": self.hyper, "seed": self.seed,
                  "class_names": list(self.class_names), "n_inputs": self.n_inputs,
                  "schema_fingerprint": self.schema_fingerprint, "info": self.info,
                  "payload": meta, "fingerprint": self.fingerprint}
        container.save(path, "model", header, arrays)


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)
