"""Majority-vote ensemble and Detect & Reject (third "adversarial" class)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from transferids import container
from transferids.attacks import AdversarialBatch
from transferids.classical import Classifier, ClassifierKind, make_classifier
from transferids.data import TERNARY_CLASSES, Dataset

REJECTED = -1
ADVERSARIAL = 2


class EnsembleIds:
    """Five binary detectors voting; a label needs 3 of 5 votes."""

    name = "ensemble"

    def __init__(self, members: list[Classifier]):
        if len(members) != 5:
            raise ValueError(f"the ensemble needs exactly 5 members, got {len(members)}")
        if any(m.n_classes != 2 for m in members):
            raise ValueError("ensemble members must be binary classifiers")
        self.members = list(members)

    @property
    def kinds(self) -> list[ClassifierKind]:
        return [m.kind for m in self.members]

    def votes(self, X) -> np.ndarray:
        return np.stack([m.predict(X) for m in self.members], axis=1)

    def predict(self, X) -> np.ndarray:
        return majority(self.votes(X))

    @property
    def fingerprint(self) -> str:
        return container.fingerprint([m.fingerprint for m in self.members])

    def save(self, path) -> None:
        container.save(path, "ensemble", {"members": [{"kind": m.kind.value, "fingerprint": m.fingerprint}
                                                      for m in self.members]}, {})


def majority(votes: np.ndarray) -> np.ndarray:
    """Row-wise binary majority of an (n, 5) vote matrix."""
    votes = np.asarray(votes)
    return (2 * votes.sum(axis=-1) > votes.shape[-1]).astype(np.int64)


def ensemble_predict(ens: EnsembleIds, x) -> np.ndarray | int:
    out = ens.predict(x)
    return int(out[0]) if np.asarray(x).ndim == 1 else out


@dataclass
class DetectRejectIds:
    """A 3-class detector whose "adversarial" verdicts are turned into rejections."""

    base: Classifier

    def __post_init__(self):
        if self.base.n_classes != 3:
            raise ValueError("Detect & Reject needs a 3-class base model")

    @property
    def kind(self) -> ClassifierKind:
        return self.base.kind

    @property
    def name(self) -> str:
        return f"dr-{self.base.kind.value}"

    def predict_ternary(self, X) -> np.ndarray:
        return self.base.predict(X)

    def predict(self, X) -> np.ndarray:
        """Binary label per row, or :data:`REJECTED`."""
        pred = self.base.predict(X)
        return np.where(pred == ADVERSARIAL, REJECTED, pred)

    @property
    def fingerprint(self) -> str:
        return self.base.fingerprint

    def save(self, path) -> None:
        self.base.save(path)


def build_detect_reject(kind, train_b: Dataset, adv: AdversarialBatch, seed: int = 0,
                        hyper: dict | None = None) -> DetectRejectIds:
    """Train ``kind`` on Training B (labels 0/1) plus ``adv`` rows labelled 2."""
    if len(adv) == 0:
        raise ValueError("Detect & Reject needs at least one adversarial training example")
    if adv.adversarials.shape[1] != train_b.n_dims or (
            adv.schema is not None and tuple(adv.schema) != tuple(train_b.schema)):
        raise ValueError("adversarial batch and Training B disagree on the feature schema")
    X = np.vstack([train_b.matrix, adv.adversarials])
    y = np.concatenate([train_b.labels, np.full(len(adv), ADVERSARIAL, dtype=np.int64)])
    clf = make_classifier(kind, hyper, seed)
    clf.fit(X, y, TERNARY_CLASSES, train_b.schema_fingerprint)
    return DetectRejectIds(clf)


def dr_predict(dr: DetectRejectIds, x) -> np.ndarray | int:
    out = dr.predict(x)
    return int(out[0]) if np.asarray(x).ndim == 1 else out
