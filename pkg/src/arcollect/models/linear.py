"""Standardization and L2-regularized logistic regression by full-batch gradient descent."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from arcollect.models.trees import sigmoid


@dataclass(frozen=True)
class StandardizationStats:
    mean: np.ndarray
    sd: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "StandardizationStats":
        return cls(X.mean(axis=0), X.std(axis=0))

    @property
    def constant(self) -> np.ndarray:
        return self.sd == 0

    def transform(self, X: np.ndarray) -> np.ndarray:
        # constant features are centered but not scaled
        scale = np.where(self.constant, 1.0, self.sd)
        return (X - self.mean) / scale

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "sd": self.sd.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizationStats":
        mean = np.asarray(d["mean"], dtype=np.float64)
        sd = np.asarray(d["sd"], dtype=np.float64)
        if mean.shape != sd.shape or np.any(sd < 0):
            raise ValueError("invalid standardization statistics")
        return cls(mean, sd)


class DivergenceError(ArithmeticError):
    pass


def loss_and_grad(
    theta: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood plus ``l2/2 * |w|^2`` and its gradient.

    ``theta`` is ``[w_1..w_p, intercept]``; the intercept is not penalized.
    """
    w, b = theta[:-1], theta[-1]
    z = X @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))
    resid = sigmoid(z) - y
    grad = np.empty_like(theta)
    grad[:-1] = X.T @ resid / len(y) + l2 * w
    grad[-1] = resid.mean()
    return loss, grad


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    lr: float = 0.1,
    max_iters: int = 2000,
    l2: float = 1e-4,
    tol: float = 1e-6,
) -> tuple[np.ndarray, float, int]:
    """Return ``(weights, intercept, iterations)``. ``X`` should already be standardized."""
    yf = np.asarray(y, dtype=np.float64)
    theta = np.zeros(X.shape[1] + 1)
    it = 0
    for it in range(1, max_iters + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grad = loss_and_grad(theta, X, yf, l2)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise DivergenceError(f"logistic regression diverged at iteration {it}; use a smaller lr")
        if np.linalg.norm(grad) < tol:
            break
        theta = theta - lr * grad
    return theta[:-1].copy(), float(theta[-1]), it


def logistic_proba(weights: np.ndarray, intercept: float, Xs: np.ndarray) -> np.ndarray:
    return sigmoid(Xs @ weights + intercept)
