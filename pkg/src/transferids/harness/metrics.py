"""Metric records and their definitions.

``accuracy``                  fraction of clean (or, in the transfer/ensemble
                              experiments, attacked) inputs given the true binary
                              label; a rejection counts as wrong.
``robust_accuracy``           on adversarial inputs: fraction rejected or given the
                              true underlying binary label.
``adversarial_detection_rate`` fraction of adversarial inputs rejected.
``clean_rejection_rate``      fraction of clean inputs rejected.
``rejection_rate``            fraction of the whole evaluation set rejected.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from transferids.defense import REJECTED

METRICS = ("accuracy", "robust_accuracy", "rejection_rate", "adversarial_detection_rate", "clean_rejection_rate")
COLUMNS = ("experiment", "method", "epsilon", "model", "metric", "value", "n")

METRIC_DEFINITIONS = {
    "accuracy": "fraction of inputs assigned their true binary label (rejections count as wrong)",
    "robust_accuracy": "fraction of adversarial inputs either rejected or assigned their true binary label",
    "adversarial_detection_rate": "fraction of adversarial inputs labelled adversarial (rejected)",
    "clean_rejection_rate": "fraction of clean inputs rejected",
    "rejection_rate": "fraction of all evaluated inputs rejected",
}


@dataclass(frozen=True)
class MetricRecord:
    experiment: str
    method: str
    epsilon: float
    model: str
    metric: str
    value: float
    n: int

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"metric value {self.value} outside [0, 1]")
        if self.n <= 0:
            raise ValueError("metric computed over an empty population")

    @property
    def cell(self) -> tuple:
        return (self.experiment, self.method, self.epsilon, self.model, self.metric)


def compute_metrics(predictions, truth, mode: str = "accuracy", is_adversarial=None, *,
                    experiment: str = "", method: str = "", epsilon: float = 0.0,
                    model: str = "") -> list[MetricRecord]:
    """Score ``predictions`` (class ids, :data:`REJECTED` allowed in robust mode) against ``truth``.

    ``mode="accuracy"`` emits a single accuracy record and refuses rejections.
    ``mode="robust"`` splits the population by ``is_adversarial`` and emits
    accuracy / clean_rejection_rate for the clean part, robust_accuracy /
    adversarial_detection_rate for the adversarial part and an overall
    rejection_rate. Empty sub-populations emit nothing.
    """
    pred = np.asarray(predictions, dtype=np.int64)
    true = np.asarray(truth, dtype=np.int64)
    if pred.shape != true.shape:
        raise ValueError(f"predictions ({pred.shape}) and truth ({true.shape}) are not aligned")
    keys = dict(experiment=experiment, method=method, epsilon=float(epsilon), model=model)
    n = pred.size
    if n == 0:
        return []
    if mode == "accuracy":
        if np.any(pred == REJECTED):
            raise ValueError("accuracy mode is undefined for rejected predictions")
        return [MetricRecord(metric="accuracy", value=float(np.mean(pred == true)), n=n, **keys)]
    if mode != "robust":
        raise ValueError(f"unknown mode {mode!r}")

    adv = np.zeros(n, dtype=bool) if is_adversarial is None else np.asarray(is_adversarial, dtype=bool)
    if adv.shape != pred.shape:
        raise ValueError("is_adversarial mask is not aligned with predictions")
    rejected = pred == REJECTED
    correct = pred == true
    out = []
    clean = ~adv
    n_clean, n_adv = int(clean.sum()), int(adv.sum())
    if n_clean:
        out.append(MetricRecord(metric="accuracy", value=float(correct[clean].mean()), n=n_clean, **keys))
        out.append(MetricRecord(metric="clean_rejection_rate", value=float(rejected[clean].mean()),
                                n=n_clean, **keys))
    if n_adv:
        out.append(MetricRecord(metric="robust_accuracy", value=float((rejected | correct)[adv].mean()),
                                n=n_adv, **keys))
        out.append(MetricRecord(metric="adversarial_detection_rate", value=float(rejected[adv].mean()),
                                n=n_adv, **keys))
    out.append(MetricRecord(metric="rejection_rate", value=float(rejected.mean()), n=n, **keys))
    return out
