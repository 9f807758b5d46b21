"""Numpy multilayer perceptron used as the white-box surrogate detector.

ReLU hidden layers with inverted dropout, a softmax output trained with
categorical cross-entropy and Adam. Besides the usual parameter gradients the
model exposes the exact gradient of the per-sample loss with respect to the
input, which is what the attacks consume.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from transferids import container

logger = logging.getLogger(__name__)


class NumericalError(RuntimeError):
    """Training diverged or produced non-finite values."""


@dataclass(frozen=True)
class MlpConfig:
    hidden_sizes: tuple[int, ...] = (512, 512)
    dropout_rate: float = 0.20
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8
    epochs: int = 20
    batch_size: int = 256
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def cross_entropy(logits: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-sample categorical cross-entropy of softmax(logits) against labels ``y``."""
    return -log_softmax(logits)[np.arange(len(y)), y]


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(state: AdamState, params: list[np.ndarray], grads: Sequence[np.ndarray],
              lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps_hat: float = 1e-8) -> None:
    """Bias-corrected Adam update, applied to ``params`` and ``state`` in place."""
    if len(grads) != len(params) or len(state.m) != len(params):
        raise ValueError("optimizer state, parameters and gradients disagree in length")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NumericalError("non-finite gradient passed to Adam")
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter shape {p.shape}")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps_hat)


@dataclass
class MlpModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    config: MlpConfig = field(default_factory=MlpConfig)
    class_names: tuple[str, ...] = ("normal", "intrusion")
    schema_fingerprint: str | None = None
    train_accuracy: float | None = None

    name = "dnn"

    def __post_init__(self):
        for a, b in zip(self.weights[:-1], self.weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise ValueError("layer shapes do not chain")
        if self.weights[-1].shape[1] != len(self.class_names):
            raise ValueError("output width does not match class count")

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_classes(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def params(self) -> list[np.ndarray]:
        return [p for wb in zip(self.weights, self.biases) for p in wb]

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.n_inputs:
            raise ValueError(f"expected {self.n_inputs} input features, got {x.shape[1]}")
        return x

    def forward(self, x: np.ndarray, rng: np.random.Generator | None = None):
        """Return logits and the cache needed for backprop.

        Dropout is active only when ``rng`` is given (training mode).
        """
        p = self.config.dropout_rate
        cache = []
        h = x
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            z = h @ W + b
            a = np.maximum(z, 0.0)
            mask = None
            if rng is not None and p > 0.0:
                mask = (rng.random(a.shape) >= p) / (1.0 - p)
                a = a * mask
            cache.append((h, z, mask))
            h = a
        logits = h @ self.weights[-1] + self.biases[-1]
        cache.append((h, None, None))
        return logits, cache

    def backward(self, dlogits: np.ndarray, cache) -> tuple[list[np.ndarray], np.ndarray]:
        """Backprop ``dlogits``; returns (parameter grads in :attr:`params` order, input grad)."""
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.weights)
        delta = dlogits
        for k in range(len(self.weights) - 1, -1, -1):
            h_in, _, _ = cache[k]
            grads_w[k] = h_in.T @ delta
            grads_b[k] = delta.sum(axis=0)
            delta = delta @ self.weights[k].T
            if k > 0:
                _, z, mask = cache[k - 1]
                if mask is not None:
                    delta = delta * mask
                delta = delta * (z > 0)
        return [g for wb in zip(grads_w, grads_b) for g in wb], delta

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        logits, _ = self.forward(x)
        return softmax(logits)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=1)

    def loss(self, x: np.ndarray, y) -> np.ndarray:
        x = self._check(x)
        logits, _ = self.forward(x)
        return cross_entropy(logits, np.atleast_1d(np.asarray(y, dtype=np.int64)))

    def input_gradient(self, x: np.ndarray, y) -> np.ndarray:
        """Gradient of each row's own loss with respect to that row (inference mode)."""
        single = np.asarray(x).ndim == 1
        x = self._check(x)
        y = np.broadcast_to(np.asarray(y, dtype=np.int64), (x.shape[0],))
        logits, cache = self.forward(x)
        dlogits = softmax(logits)
        dlogits[np.arange(len(y)), y] -= 1.0
        _, dx = self.backward(dlogits, cache)
        return dx[0] if single else dx

    def param_gradients(self, x: np.ndarray, y) -> list[np.ndarray]:
        """Gradient of the summed loss over rows with respect to every parameter."""
        x = self._check(x)
        y = np.asarray(y, dtype=np.int64)
        logits, cache = self.forward(x)
        dlogits = softmax(logits)
        dlogits[np.arange(len(y)), y] -= 1.0
        grads, _ = self.backward(dlogits, cache)
        return grads

    @property
    def fingerprint(self) -> str:
        return container.fingerprint(*self.params)

    def save(self, path) -> None:
        meta = {"model": "mlp", "config": asdict(self.config), "class_names": list(self.class_names),
                "schema_fingerprint": self.schema_fingerprint, "n_layers": len(self.weights),
                "train_accuracy": self.train_accuracy, "fingerprint": self.fingerprint}
        arrays = {}
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            arrays[f"W{k}"] = W
            arrays[f"b{k}"] = b
        container.save(path, "model", meta, arrays)

    @classmethod
    def load(cls, path, expect_schema: str | None = None) -> "MlpModel":
        meta, arrays = container.load(path, kind="model")
        if meta.get("model") != "mlp":
            raise container.ContainerError(f"{path} does not hold an MLP")
        if expect_schema is not None and meta["schema_fingerprint"] != expect_schema:
            raise container.ContainerError("model was trained on a different feature schema")
        n = meta["n_layers"]
        model = cls([arrays[f"W{k}"] for k in range(n)], [arrays[f"b{k}"] for k in range(n)],
                    MlpConfig(**meta["config"]), tuple(meta["class_names"]), meta["schema_fingerprint"],
                    meta.get("train_accuracy"))
        if model.fingerprint != meta["fingerprint"]:
            raise container.ContainerError(f"{path}: stored fingerprint does not match the parameters")
        return model


def init_mlp(n_inputs: int, n_classes: int, cfg: MlpConfig, rng: np.random.Generator,
             class_names: Sequence[str] | None = None) -> MlpModel:
    """He-uniform weights, zero biases."""
    sizes = [n_inputs, *cfg.hidden_sizes, n_classes]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    names = tuple(class_names) if class_names is not None else tuple(str(k) for k in range(n_classes))
    return MlpModel(weights, biases, cfg, names)


def train_mlp(data, cfg: MlpConfig = MlpConfig()) -> MlpModel:
    """Train on a :class:`~transferids.data.Dataset` (or anything with matrix/labels/class_names)."""
    X = np.asarray(data.matrix, dtype=np.float64)
    y = np.asarray(data.labels, dtype=np.int64)
    n_classes = len(data.class_names)
    if X.shape[0] == 0:
        raise ValueError("cannot train on an empty dataset")
    if y.max() >= n_classes or y.min() < 0:
        raise ValueError("labels fall outside the class range")
    rng = np.random.default_rng(cfg.seed)
    model = init_mlp(X.shape[1], n_classes, cfg, rng, data.class_names)
    model.schema_fingerprint = getattr(data, "schema_fingerprint", None)
    params = model.params
    state = AdamState.zeros_like(params)
    n = X.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            xb, yb = X[batch], y[batch]
            logits, cache = model.forward(xb, rng)
            losses = cross_entropy(logits, yb)
            batch_loss = losses.mean()
            if not np.isfinite(batch_loss):
                raise NumericalError(f"non-finite loss at epoch {epoch}, batch starting {start}")
            total += losses.sum()
            dlogits = softmax(logits)
            dlogits[np.arange(len(yb)), yb] -= 1.0
            grads, _ = model.backward(dlogits / len(yb), cache)
            adam_step(state, params, grads, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps_hat)
        logger.debug("epoch %d: mean loss %.5f", epoch, total / n)
    model.train_accuracy = float(np.mean(model.predict(X) == y))
    logger.info("mlp trained: %d epochs, training accuracy %.4f", cfg.epochs, model.train_accuracy)
    return model


def predict_proba(model: MlpModel, x: np.ndarray) -> np.ndarray:
    return model.predict_proba(x)


def input_gradient(model: MlpModel, x: np.ndarray, y) -> np.ndarray:
    return model.input_gradient(x, y)
