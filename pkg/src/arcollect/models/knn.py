"""Brute-force k-nearest-neighbors late-payment scorer."""

from __future__ import annotations

import numpy as np

CHUNK = 64


def knn_proba(train_X: np.ndarray, train_y: np.ndarray, k: int, X: np.ndarray) -> np.ndarray:
    """Late fraction among the ``k`` nearest training rows (Euclidean).

    Distance ties at the k-th neighbor are resolved in favor of the lower
    training row index.
    """
    n = train_X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be between 1 and the training size {n}")
    y = np.asarray(train_y, dtype=np.float64)
    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], CHUNK):
        q = X[start : start + CHUNK]
        # exact per-coordinate differences keep duplicate points at distance 0
        d = np.zeros((q.shape[0], n))
        for j in range(train_X.shape[1]):
            diff = q[:, j : j + 1] - train_X[:, j]
            d += diff * diff
        if k == n:
            out[start : start + len(q)] = y.mean()
            continue
        kth = np.partition(d, k - 1, axis=1)[:, k - 1 : k]
        closer = d < kth
        n_closer = closer.sum(axis=1, keepdims=True)
        ties = d == kth
        take_ties = ties & (np.cumsum(ties, axis=1) <= k - n_closer)
        chosen = closer | take_ties
        out[start : start + len(q)] = (chosen @ y) / k
    return out
