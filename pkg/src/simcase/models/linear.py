"""L2-regularized logistic regression and linear SVM trained by plain SGD.

Both minimize ``mean(loss_i) + l2 / 2 * ||w||^2`` (bias unregularized)
with one sample per step, seed-shuffled epochs and a fixed learning rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

KINDS = ("logistic", "hinge")


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    kind: str
    hyper: dict = field(default_factory=dict)
    history: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown linear model kind {self.kind!r}")
        self.weights = np.asarray(self.weights, dtype=float)
        if not np.all(np.isfinite(self.weights)) or not math.isfinite(self.bias):
            raise ValueError("linear model parameters must be finite")

    @property
    def n_features(self) -> int:
        return len(self.weights)

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X @ self.weights).ravel() + self.bias

    def score(self, X) -> np.ndarray:
        """Sigmoid probability for logistic models, the signed margin for hinge models."""
        z = self.decision_function(X)
        return expit(z) if self.kind == "logistic" else z

    def to_dict(self) -> dict:
        return {"kind": self.kind, "weights": self.weights.tolist(), "bias": float(self.bias),
                "hyper": self.hyper, "history": list(self.history)}

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(np.asarray(d["weights"], dtype=float), float(d["bias"]), d["kind"],
                   dict(d.get("hyper", {})), list(d.get("history", [])))


def _as_labels(y) -> np.ndarray:
    y = np.asarray(y).astype(float).ravel()
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be binary 0/1")
    if y.min() == y.max():
        raise ValueError("training needs both classes; got a single-class label vector")
    return y


def logistic_objective(w, b, X, y, l2: float) -> float:
    z = np.asarray(X @ w).ravel() + b
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * np.dot(w, w))


def logistic_gradient(w, b, X, y, l2: float) -> tuple[np.ndarray, float]:
    z = np.asarray(X @ w).ravel() + b
    r = expit(z) - y
    gw = np.asarray(X.T @ r).ravel() / len(y) + l2 * w
    return gw, float(r.mean())


def hinge_objective(w, b, X, y, l2: float) -> float:
    s = 2.0 * y - 1.0
    margin = s * (np.asarray(X @ w).ravel() + b)
    return float(np.mean(np.maximum(0.0, 1.0 - margin)) + 0.5 * l2 * np.dot(w, w))


def hinge_gradient(w, b, X, y, l2: float) -> tuple[np.ndarray, float]:
    """Subgradient; exact wherever no sample sits on a margin of 1."""
    s = 2.0 * y - 1.0
    margin = s * (np.asarray(X @ w).ravel() + b)
    coef = np.where(margin < 1.0, -s, 0.0)
    gw = np.asarray(X.T @ coef).ravel() / len(y) + l2 * w
    return gw, float(coef.mean())


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _sgd(X, y, kind: str, l2: float, lr: float, epochs: int, seed: int, average: bool, record_history: bool):
    X = sp.csr_matrix(X, dtype=float)
    y = _as_labels(y)
    m, n = X.shape
    if len(y) != m:
        raise ValueError("vectors and labels differ in length")
    if not 0 <= lr * l2 < 1:
        raise ValueError("learning rate times l2 must lie in [0, 1)")
    indptr, indices, data = X.indptr, X.indices, X.data
    signs = 2.0 * y - 1.0
    decay = 1.0 - lr * l2

    # w = scale * v keeps the L2 shrink O(1) per step
    v = np.zeros(n)
    scale = 1.0
    b = 0.0
    # running sum of iterates: sum_w = acc_scale * v + acc_corr
    acc_scale = 0.0
    acc_corr = np.zeros(n)
    acc_b = 0.0
    steps = 0
    rng = np.random.default_rng(seed)
    objective = logistic_objective if kind == "logistic" else hinge_objective
    history = []

    for _ in range(epochs):
        for i in rng.permutation(m):
            lo, hi = indptr[i], indptr[i + 1]
            idx = indices[lo:hi]
            x = data[lo:hi]
            z = scale * float(v[idx] @ x) + b
            if kind == "logistic":
                g = _sigmoid(z) - y[i]
            else:
                g = -signs[i] if signs[i] * z < 1.0 else 0.0
            scale *= decay
            if g != 0.0 and hi > lo:
                delta = (-lr * g / scale) * x
                v[idx] += delta
                if average:
                    acc_corr[idx] -= acc_scale * delta
            b -= lr * g
            if average:
                acc_scale += scale
                acc_b += b
                steps += 1
            if scale < 1e-4:
                # fold the running sum into the explicit part before rescaling v
                if average:
                    acc_corr += acc_scale * v
                    acc_scale = 0.0
                v *= scale
                scale = 1.0
        if record_history:
            w_now = scale * v
            history.append(objective(w_now, b, X, y, l2))

    if average and steps:
        return (acc_scale * v + acc_corr) / steps, acc_b / steps, history
    return scale * v, b, history


def train_logistic(X, y, l2: float = 1e-4, lr: float = 0.1, epochs: int = 100, seed: int = 0,
                   record_history: bool = True) -> LinearModel:
    w, b, hist = _sgd(X, y, "logistic", l2, lr, epochs, seed, average=False, record_history=record_history)
    hyper = {"l2": l2, "lr": lr, "epochs": epochs, "seed": seed}
    return LinearModel(w, float(b), "logistic", hyper, hist)


def train_linear_svm(X, y, l2: float = 1e-4, lr: float = 0.1, epochs: int = 100, seed: int = 0,
                     average: bool = True, record_history: bool = False) -> LinearModel:
    """Hinge-loss SGD; returns the average of all per-step iterates when ``average``."""
    w, b, hist = _sgd(X, y, "hinge", l2, lr, epochs, seed, average=average, record_history=record_history)
    hyper = {"l2": l2, "lr": lr, "epochs": epochs, "seed": seed, "average": average}
    return LinearModel(w, float(b), "hinge", hyper, hist)
