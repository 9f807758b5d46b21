"""FGSM and PGD evasion attacks in scaled-feature space.

Both are untargeted: they ascend the surrogate's loss on the true label under
an L-infinity budget and keep every feature inside the ``[0, 1]`` box.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Protocol

import numpy as np

from transferids import container
from transferids.data import Dataset


class GradientModel(Protocol):
    schema_fingerprint: str | None

    def input_gradient(self, x: np.ndarray, y) -> np.ndarray: ...
    def predict(self, x: np.ndarray) -> np.ndarray: ...


METHODS = ("fgsm", "pgd")


@dataclass(frozen=True)
class AttackConfig:
    method: str = "fgsm"
    epsilon: float = 0.1
    pgd_step: float | None = None  # None means epsilon / 4
    pgd_iters: int = 10
    random_start: bool = True
    clip_min: float = 0.0
    clip_max: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "method", self.method.lower())
        if self.method not in METHODS:
            raise ValueError(f"unknown attack method {self.method!r}")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")
        if self.method == "pgd":
            if self.pgd_iters < 0:
                raise ValueError("pgd_iters must be >= 0")
            if self.pgd_step is not None and not self.pgd_step > 0:
                raise ValueError("pgd_step must be > 0")

    @property
    def step(self) -> float:
        return self.epsilon / 4.0 if self.pgd_step is None else self.pgd_step


def _signed_gradient(model, x, y, mask):
    g = model.input_gradient(x, y)
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("surrogate returned a non-finite input gradient")
    s = np.sign(g)
    return s if mask is None else s * mask


def _as_rows(x):
    x = np.asarray(x, dtype=np.float64)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


def fgsm(model: GradientModel, x, y, epsilon: float, clip=(0.0, 1.0), mask=None) -> np.ndarray:
    """``clip(x + epsilon * sign(grad_x J(x, y)))``."""
    rows, single = _as_rows(x)
    y = np.broadcast_to(np.asarray(y, dtype=np.int64), (rows.shape[0],))
    adv = np.clip(rows + epsilon * _signed_gradient(model, rows, y, mask), clip[0], clip[1])
    return adv[0] if single else adv


def random_start_noise(n_rows: int, n_dims: int, seed: int, row_offset: int = 0) -> np.ndarray:
    """Uniform(-1, 1) noise whose row ``i`` depends only on (seed, row_offset + i)."""
    out = np.empty((n_rows, n_dims))
    for i in range(n_rows):
        out[i] = np.random.default_rng([seed, row_offset + i]).uniform(-1.0, 1.0, n_dims)
    return out


def pgd(model: GradientModel, x, y, cfg: AttackConfig, mask=None, row_offset: int = 0) -> np.ndarray:
    """Iterated signed-gradient ascent projected onto the epsilon ball and the box."""
    rows, single = _as_rows(x)
    y = np.broadcast_to(np.asarray(y, dtype=np.int64), (rows.shape[0],))
    eps = cfg.epsilon
    adv = rows.copy()
    if cfg.random_start and eps > 0:
        noise = eps * random_start_noise(rows.shape[0], rows.shape[1], cfg.seed, row_offset)
        if mask is not None:
            noise = noise * mask
        adv = np.clip(rows + noise, cfg.clip_min, cfg.clip_max)
    for _ in range(cfg.pgd_iters):
        stepped = adv + cfg.step * _signed_gradient(model, adv, y, mask)
        adv = np.clip(np.clip(stepped, rows - eps, rows + eps), cfg.clip_min, cfg.clip_max)
    return adv[0] if single else adv


def attack(model: GradientModel, x, y, cfg: AttackConfig, mask=None, row_offset: int = 0) -> np.ndarray:
    if cfg.method == "fgsm":
        return fgsm(model, x, y, cfg.epsilon, (cfg.clip_min, cfg.clip_max), mask)
    return pgd(model, x, y, cfg, mask, row_offset)


@dataclass
class AdversarialBatch:
    originals: np.ndarray
    adversarials: np.ndarray
    labels: np.ndarray
    source_fingerprint: str | None
    config: AttackConfig
    schema: tuple | None = None
    class_names: tuple[str, ...] = ("normal", "intrusion")

    def __post_init__(self):
        if self.originals.shape != self.adversarials.shape:
            raise ValueError("originals and adversarials differ in shape")

    def __len__(self) -> int:
        return self.adversarials.shape[0]

    def max_perturbation(self) -> float:
        if not len(self):
            return 0.0
        return float(np.max(np.abs(self.adversarials - self.originals)))

    def check_constraints(self, tol: float = 1e-9) -> bool:
        a = self.adversarials
        return (self.max_perturbation() <= self.config.epsilon + tol
                and bool(np.all(a >= self.config.clip_min)) and bool(np.all(a <= self.config.clip_max)))

    @property
    def fingerprint(self) -> str:
        return container.fingerprint(self.adversarials, self.labels)

    def as_dataset(self, label: int | None = None, class_names=None) -> Dataset:
        """Adversarial rows as a Dataset, keeping true labels unless ``label`` overrides them."""
        labels = self.labels.copy() if label is None else np.full(len(self), label, dtype=np.int64)
        return Dataset(self.adversarials, labels, tuple(self.schema), tuple(class_names or self.class_names))

    def save(self, path) -> None:
        meta = {"source_fingerprint": self.source_fingerprint, "config": asdict(self.config),
                "schema": [list(s) for s in self.schema] if self.schema else None,
                "class_names": list(self.class_names), "fingerprint": self.fingerprint}
        container.save(path, "adversarial_batch", meta,
                       {"originals": self.originals, "adversarials": self.adversarials, "labels": self.labels})

    @classmethod
    def load(cls, path) -> "AdversarialBatch":
        meta, arrays = container.load(path, kind="adversarial_batch")
        schema = tuple((s[0], s[1]) for s in meta["schema"]) if meta["schema"] else None
        return cls(arrays["originals"], arrays["adversarials"],
                   arrays["labels"], meta["source_fingerprint"], AttackConfig(**meta["config"]),
                   schema, tuple(meta["class_names"]))


def craft_batch(model: GradientModel, data: Dataset, cfg: AttackConfig, mask=None,
                chunk_size: int = 4096) -> AdversarialBatch:
    """Attack every record of ``data`` with its true label; row order is preserved."""
    expected = getattr(model, "schema_fingerprint", None)
    if expected is not None and data.schema_fingerprint != expected:
        raise ValueError("dataset schema does not match the surrogate's training schema")
    X = data.matrix
    adv = np.empty_like(X)
    for start in range(0, len(data), chunk_size):
        stop = min(start + chunk_size, len(data))
        adv[start:stop] = attack(model, X[start:stop], data.labels[start:stop], cfg, mask, row_offset=start)
    return AdversarialBatch(X.copy(), adv, data.labels.copy(), getattr(model, "fingerprint", None), cfg,
                            data.schema, data.class_names)
