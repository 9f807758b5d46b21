"""Linear victims: SVM (hinge loss), logistic regression and LDA.

SVM and logistic regression reduce multi-class problems one-vs-rest; LDA is
natively multi-class.
"""
from __future__ import annotations

import logging

import numpy as np

from transferids import kernels
from transferids.classical.base import Classifier, ClassifierKind, softmax_rows

logger = logging.getLogger(__name__)


def _ovr_targets(y: np.ndarray, n_classes: int) -> list[np.ndarray]:
    if n_classes == 2:
        return [y == 1]
    return [y == k for k in range(n_classes)]


class _OneVsRest(Classifier):
    """Shared decision/predict logic for per-class linear scorers ``X @ W + b``."""

    def decision_function(self, X) -> np.ndarray:
        X = self._check(X)
        return X @ self.W + self.b

    def _predict(self, X):
        f = X @ self.W + self.b
        if self.n_classes == 2:
            return (f[:, 0] > 0).astype(np.int64)
        return np.argmax(f, axis=1)

    def _payload(self):
        return {}, {"W": self.W, "b": self.b}

    def _restore(self, meta, arrays):
        self.W = arrays["W"].reshape(self.n_inputs, -1)
        self.b = arrays["b"]


class LinearSVM(_OneVsRest):
    """L2-regularised hinge loss, ``0.5 |w|^2 + C sum(hinge)``, solved by dual coordinate descent.

    The bias is folded in as a constant feature (so it is regularised too).
    """

    kind = ClassifierKind.SVM

    @classmethod
    def defaults(cls):
        return {"C": 1.0, "epochs": 1000, "tol": 1e-3}

    def _fit(self, X, y, n_classes):
        C, epochs, tol = float(self.hyper["C"]), int(self.hyper["epochs"]), float(self.hyper["tol"])
        qii = np.einsum("ij,ij->i", X, X) + 1.0
        targets = _ovr_targets(y, n_classes)
        W = np.zeros((X.shape[1], len(targets)))
        b = np.zeros(len(targets))
        self.alphas = []
        runs = []
        for k, target in enumerate(targets):
            ypm = np.where(target, 1.0, -1.0)
            rng = np.random.default_rng([self.seed, k])
            alpha = np.zeros(X.shape[0])
            w = np.zeros(X.shape[1] + 1)
            converged = False
            for epoch in range(1, epochs + 1):
                order = rng.permutation(X.shape[0]).astype(np.int64)
                pg_max, pg_min = kernels.svm_dual_cd_epoch(X, ypm, alpha, w, qii, C, order)
                if pg_max - pg_min < tol:
                    converged = True
                    break
            if not converged:
                logger.warning("svm problem %d hit the %d-epoch cap (gap %.3g)", k, epochs, pg_max - pg_min)
            W[:, k], b[k] = w[:-1], w[-1]
            self.alphas.append(alpha)
            runs.append({"epochs": epoch, "converged": converged})
        self.W, self.b = W, b
        self.info = {"runs": runs}

    def _predict_proba(self, X):
        f = X @ self.W + self.b
        if self.n_classes == 2:
            f = np.hstack([np.zeros_like(f), f])
        return softmax_rows(f)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _top_eigenvalue(X: np.ndarray, iters: int = 100) -> float:
    """Largest eigenvalue of ``[X 1]^T [X 1]`` by power iteration."""
    v = np.ones(X.shape[1] + 1)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        u = X @ v[:-1] + v[-1]
        w = np.append(X.T @ u, u.sum())
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            break
        v = w / lam
    return lam


class LogisticRegression(_OneVsRest):
    """Mean log-loss + ``l2/2 |w|^2`` (bias unpenalised), Nesterov-accelerated full-batch gradient descent."""

    kind = ClassifierKind.LogisticRegression

    @classmethod
    def defaults(cls):
        return {"l2": 1e-4, "epochs": 500}

    def _fit(self, X, y, n_classes):
        l2, epochs = float(self.hyper["l2"]), int(self.hyper["epochs"])
        n, d = X.shape
        lipschitz = 0.25 * 1.05 * _top_eigenvalue(X) / n + l2
        step = 1.0 / lipschitz
        targets = _ovr_targets(y, n_classes)
        W = np.zeros((d, len(targets)))
        b = np.zeros(len(targets))
        grad_norms = []
        for k, target in enumerate(targets):
            t01 = target.astype(np.float64)
            theta = np.zeros(d + 1)
            z = theta.copy()
            t = 1.0
            for _ in range(epochs):
                r = _sigmoid(X @ z[:-1] + z[-1]) - t01
                grad = np.append(X.T @ r / n + l2 * z[:-1], r.mean())
                theta_next = z - step * grad
                t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
                z = theta_next + ((t - 1.0) / t_next) * (theta_next - theta)
                theta, t = theta_next, t_next
            r = _sigmoid(X @ theta[:-1] + theta[-1]) - t01
            grad = np.append(X.T @ r / n + l2 * theta[:-1], r.mean())
            grad_norms.append(float(np.linalg.norm(grad)))
            W[:, k], b[k] = theta[:-1], theta[-1]
        self.W, self.b = W, b
        self.info = {"epochs": epochs, "final_grad_norm": grad_norms}

    def _predict_proba(self, X):
        p = _sigmoid(X @ self.W + self.b)
        if self.n_classes == 2:
            return np.hstack([1.0 - p, p])
        total = p.sum(axis=1, keepdims=True)
        return np.where(total > 0, p / np.where(total > 0, total, 1.0), 1.0 / self.n_classes)


class LDA(Classifier):
    """Gaussian classes with a shared (pooled, ridge-stabilised) covariance."""

    kind = ClassifierKind.LDA

    @classmethod
    def defaults(cls):
        return {"ridge": 1e-6}

    def _fit(self, X, y, n_classes):
        n, d = X.shape
        counts = np.bincount(y, minlength=n_classes).astype(np.float64)
        priors = counts / n
        means = np.zeros((n_classes, d))
        scatter = np.zeros((d, d))
        for k in range(n_classes):
            if counts[k] == 0:
                continue
            Xk = X[y == k]
            means[k] = Xk.mean(axis=0)
            centered = Xk - means[k]
            scatter += centered.T @ centered
        cov = scatter / max(n - np.count_nonzero(counts), 1)
        trace = float(np.trace(cov))
        ridge = self.hyper["ridge"] * (trace / d if trace > 0 else 1.0)
        cov = cov + ridge * np.eye(d)
        present = counts > 0
        coef = np.linalg.solve(cov, means.T).T
        intercept = -0.5 * np.einsum("kd,kd->k", coef, means)
        with np.errstate(divide="ignore"):
            intercept = intercept + np.where(present, np.log(np.where(present, priors, 1.0)), -np.inf)
        self.means, self.priors, self.covariance = means, priors, cov
        self.coef, self.intercept = coef, intercept
        self.info = {"ridge": ridge}

    def decision_function(self, X) -> np.ndarray:
        X = self._check(X)
        return X @ self.coef.T + self.intercept

    def _predict(self, X):
        return np.argmax(X @ self.coef.T + self.intercept, axis=1)

    def _predict_proba(self, X):
        return softmax_rows(X @ self.coef.T + self.intercept)

    def _payload(self):
        return {}, {"coef": self.coef, "intercept": self.intercept, "means": self.means, "priors": self.priors}

    def _restore(self, meta, arrays):
        self.coef = arrays["coef"].reshape(self.n_classes, -1)
        self.intercept = arrays["intercept"]
        self.means = arrays["means"].reshape(self.n_classes, -1)
        self.priors = arrays["priors"]
