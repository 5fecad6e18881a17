"""Gaussian naive Bayes."""

from __future__ import annotations

import numpy as np

VAR_FLOOR_RATIO = 1e-9


def fit_naive_bayes(X: np.ndarray, y: np.ndarray) -> dict[str, np.ndarray]:
    y = np.asarray(y)
    classes = [X[y == 0], X[y == 1]]
    if any(len(c) == 0 for c in classes):
        raise ValueError("naive Bayes needs at least one row of each class")
    floor = VAR_FLOOR_RATIO * float(X.var(axis=0).max())
    if floor <= 0:
        floor = VAR_FLOOR_RATIO
    means = np.stack([c.mean(axis=0) for c in classes])
    variances = np.maximum(np.stack([c.var(axis=0) for c in classes]), floor)
    priors = np.array([len(c) for c in classes], dtype=np.float64) / len(y)
    return {"means": means, "variances": variances, "priors": priors}


def naive_bayes_proba(params: dict[str, np.ndarray], X: np.ndarray) -> np.ndarray:
    means, variances, priors = params["means"], params["variances"], params["priors"]
    joint = np.empty((X.shape[0], 2))
    for k in range(2):
        ll = -0.5 * (np.log(2.0 * np.pi * variances[k]) + (X - means[k]) ** 2 / variances[k])
        joint[:, k] = np.log(priors[k]) + ll.sum(axis=1)
    return np.exp(joint[:, 1] - np.logaddexp(joint[:, 0], joint[:, 1]))
