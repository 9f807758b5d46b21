"""The five black-box victim classifiers behind one fit/predict contract."""
from __future__ import annotations

import numpy as np

from transferids import container
from transferids.classical.base import Classifier, ClassifierKind
from transferids.classical.forest import RandomForest
from transferids.classical.linear import LDA, LinearSVM, LogisticRegression
from transferids.classical.tree import DecisionTree, TreeArrays, grow_tree

REGISTRY: dict[ClassifierKind, type[Classifier]] = {
    ClassifierKind.SVM: LinearSVM,
    ClassifierKind.DecisionTree: DecisionTree,
    ClassifierKind.LogisticRegression: LogisticRegression,
    ClassifierKind.RandomForest: RandomForest,
    ClassifierKind.LDA: LDA,
}

# Order used throughout reports.
KINDS = (ClassifierKind.SVM, ClassifierKind.DecisionTree, ClassifierKind.LogisticRegression,
         ClassifierKind.RandomForest, ClassifierKind.LDA)


def make_classifier(kind, hyper: dict | None = None, seed: int = 0) -> Classifier:
    return REGISTRY[ClassifierKind.parse(kind)](seed=seed, **(hyper or {}))


def train_classifier(kind, data, hyper: dict | None = None, seed: int = 0) -> Classifier:
    return make_classifier(kind, hyper, seed).fit_dataset(data)


def predict_class(clf: Classifier, x) -> np.ndarray | int:
    out = clf.predict(x)
    return int(out[0]) if np.asarray(x).ndim == 1 else out


def predict_proba_classical(clf: Classifier, x) -> np.ndarray:
    out = clf.predict_proba(x)
    return out[0] if np.asarray(x).ndim == 1 else out


def load_classifier(path, expect_schema: str | None = None) -> Classifier:
    meta, arrays = container.load(path, kind="model")
    kind = ClassifierKind.parse(meta["model"])
    if expect_schema is not None and meta["schema_fingerprint"] != expect_schema:
        raise container.ContainerError("classifier was trained on a different feature schema")
    clf = REGISTRY[kind](seed=meta["seed"], **meta["hyper"])
    clf.class_names = tuple(meta["class_names"])
    clf.n_inputs = meta["n_inputs"]
    clf.schema_fingerprint = meta["schema_fingerprint"]
    clf.info = meta["info"]
    clf._restore(meta["payload"], arrays)
    if clf.fingerprint != meta["fingerprint"]:
        raise container.ContainerError(f"{path}: stored fingerprint does not match the parameters")
    return clf


__all__ = [
    "Classifier", "ClassifierKind", "DecisionTree", "KINDS", "LDA", "LinearSVM", "LogisticRegression",
    "RandomForest", "TreeArrays", "grow_tree", "load_classifier", "make_classifier", "predict_class",
    "predict_proba_classical", "train_classifier",
]
