"""Decision trees, random forests and logistic-loss gradient boosting.

Trees are grown level by level over presorted feature orders. Candidate
thresholds are midpoints between consecutive distinct values, and a sample
goes left when ``x <= threshold``. Split search visits features in index
order and thresholds in ascending order, keeping the first strict optimum,
so fitting is fully deterministic for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

GINI = 0
NEWTON = 1
HESSIAN_FLOOR = 1e-12


@dataclass(frozen=True)
class DecisionTree:
    """Flat binary tree. ``feature[i] == -1`` marks a leaf holding ``value[i]``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def predict(self, X: np.ndarray) -> np.ndarray:
        return _predict_tree(
            np.ascontiguousarray(X, dtype=np.float64),
            self.feature,
            self.threshold,
            self.left,
            self.right,
            self.value,
        )

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        tree = cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64),
        )
        n = tree.n_nodes
        if not (len(tree.threshold) == len(tree.left) == len(tree.right) == len(tree.value) == n):
            raise ValueError("tree arrays have inconsistent lengths")
        internal = tree.feature >= 0
        if np.any(tree.left[internal] >= n) or np.any(tree.right[internal] >= n):
            raise ValueError("tree child index out of range")
        return tree


@numba.njit(cache=True)
def _predict_tree(X, feature, threshold, left, right, value):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@numba.njit(cache=True)
def _splitmix(state):
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _impurity(n, pos):
    # n * gini for a node with n samples of which pos are positive
    if n <= 0.0:
        return 0.0
    return 2.0 * pos * (n - pos) / n


@numba.njit(cache=True)
def _compact(src, dst, node_of, n_rows):
    """Copy the first ``n_rows`` rows of ``src`` whose sample is in an open node.

    Returns the number of rows kept. ``src`` and ``dst`` may alias.
    """
    kept = 0
    for f in range(src.shape[1]):
        kept = 0
        for t in range(n_rows):
            i = src[t, f]
            if node_of[i] >= 0:
                dst[kept, f] = i
                kept += 1
    return kept


@numba.njit(cache=True)
def _grow(X, order, a, b, c, mode, max_depth, min_leaf, mtry, seed):
    """Grow one tree.

    Per-sample statistics: ``a`` is the sample weight (bootstrap count or 1),
    ``b`` the weighted target (GINI: weight * y; NEWTON: gradient) and ``c``
    the hessian (NEWTON only). Samples with ``a == 0`` are ignored.
    """
    n, p = X.shape
    cap = 2 * n + 1
    feature = -np.ones(cap, dtype=np.int64)
    threshold = np.zeros(cap)
    left = -np.ones(cap, dtype=np.int64)
    right = -np.ones(cap, dtype=np.int64)
    value = np.zeros(cap)
    tot_a = np.zeros(cap)
    tot_b = np.zeros(cap)
    tot_c = np.zeros(cap)
    rng = np.empty(1, dtype=np.uint64)
    rng[0] = np.uint64(seed)

    node_of = -np.ones(n, dtype=np.int64)
    for i in range(n):
        if a[i] > 0:
            node_of[i] = 0
            tot_a[0] += a[i]
            tot_b[0] += b[i]
            tot_c[0] += c[i]
    # sorted orders restricted to samples still sitting in open nodes
    work = np.empty_like(order)
    n_active = _compact(order, work, node_of, n)
    n_nodes = 1
    level_start = 0
    level_end = 1
    depth = 0
    perm = np.arange(p)

    while level_start < level_end:
        # which nodes of this level may split, and on which features
        splittable = np.zeros(level_end - level_start, dtype=np.bool_)
        use = np.zeros((level_end - level_start, p), dtype=np.bool_)
        for k in range(level_end - level_start):
            nd = level_start + k
            if mode == GINI:
                value[nd] = tot_b[nd] / tot_a[nd] if tot_a[nd] > 0 else 0.0
                pure = tot_b[nd] <= 0.0 or tot_b[nd] >= tot_a[nd]
            else:
                value[nd] = tot_b[nd] / max(tot_c[nd], HESSIAN_FLOOR)
                pure = False
            if depth < max_depth and tot_a[nd] >= 2 * min_leaf and not pure:
                splittable[k] = True
                if mtry >= p:
                    for f in range(p):
                        use[k, f] = True
                else:
                    for j in range(p):
                        perm[j] = j
                    for j in range(mtry):
                        r = j + np.int64(_splitmix(rng) % np.uint64(p - j))
                        tmp = perm[j]
                        perm[j] = perm[r]
                        perm[r] = tmp
                        use[k, perm[j]] = True

        width = level_end - level_start
        best_score = np.full(width, -np.inf)
        best_feat = -np.ones(width, dtype=np.int64)
        best_thr = np.zeros(width)
        acc_a = np.zeros(width)
        acc_b = np.zeros(width)
        acc_c = np.zeros(width)
        last_x = np.zeros(width)
        seen = np.zeros(width, dtype=np.bool_)
        any_split = False
        for k in range(width):
            if splittable[k]:
                any_split = True
        if not any_split:
            break

        for f in range(p):
            acc_a[:] = 0.0
            acc_b[:] = 0.0
            acc_c[:] = 0.0
            seen[:] = False
            for t in range(n_active):
                i = work[t, f]
                nd = node_of[i]
                if nd < level_start:
                    continue
                k = nd - level_start
                if not splittable[k] or not use[k, f]:
                    continue
                x = X[i, f]
                if seen[k] and x > last_x[k]:
                    la = acc_a[k]
                    ra = tot_a[nd] - la
                    if la >= min_leaf and ra >= min_leaf:
                        lb = acc_b[k]
                        rb = tot_b[nd] - lb
                        if mode == GINI:
                            score = -(_impurity(la, lb) + _impurity(ra, rb))
                        else:
                            score = lb * lb / la + rb * rb / ra
                        if score > best_score[k]:
                            best_score[k] = score
                            best_feat[k] = f
                            thr = 0.5 * (last_x[k] + x)
                            if thr >= x:
                                thr = last_x[k]
                            best_thr[k] = thr
                acc_a[k] += a[i]
                acc_b[k] += b[i]
                acc_c[k] += c[i]
                last_x[k] = x
                seen[k] = True

        # accept splits that strictly improve on the parent
        next_start = n_nodes
        for k in range(width):
            nd = level_start + k
            if best_feat[k] < 0:
                continue
            if mode == GINI:
                parent = -_impurity(tot_a[nd], tot_b[nd])
            else:
                parent = tot_b[nd] * tot_b[nd] / tot_a[nd]
            if not best_score[k] > parent:
                continue
            feature[nd] = best_feat[k]
            threshold[nd] = best_thr[k]
            left[nd] = n_nodes
            right[nd] = n_nodes + 1
            n_nodes += 2
        for i in range(n):
            nd = node_of[i]
            if nd < level_start or feature[nd] < 0:
                if nd >= level_start:
                    node_of[i] = -1
                continue
            child = left[nd] if X[i, feature[nd]] <= threshold[nd] else right[nd]
            node_of[i] = child
            tot_a[child] += a[i]
            tot_b[child] += b[i]
            tot_c[child] += c[i]
        level_start = next_start
        level_end = n_nodes
        depth += 1
        n_active = _compact(work, work, node_of, n_active)

    # remaining open nodes become leaves
    for nd in range(level_start, level_end):
        if mode == GINI:
            value[nd] = tot_b[nd] / tot_a[nd] if tot_a[nd] > 0 else 0.0
        else:
            value[nd] = tot_b[nd] / max(tot_c[nd], HESSIAN_FLOOR)
    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


def presort(X: np.ndarray) -> np.ndarray:
    """Column-wise stable argsort, shape ``(n, p)``."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable"))


def grow_tree(
    X: np.ndarray,
    order: np.ndarray,
    weight: np.ndarray,
    target: np.ndarray,
    hessian: np.ndarray | None,
    mode: int,
    max_depth: int,
    min_leaf: int,
    mtry: int,
    seed: int,
) -> DecisionTree:
    if hessian is None:
        hessian = np.zeros(len(weight))
    arrays = _grow(
        np.ascontiguousarray(X, dtype=np.float64),
        order,
        np.ascontiguousarray(weight, dtype=np.float64),
        np.ascontiguousarray(target, dtype=np.float64),
        np.ascontiguousarray(hessian, dtype=np.float64),
        mode,
        max_depth,
        min_leaf,
        mtry,
        seed,
    )
    return DecisionTree(*arrays)


def _tree_seeds(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def fit_random_forest(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int = 300,
    max_depth: int = 16,
    min_leaf: int = 5,
    mtry: int | None = None,
    seed: int = 0,
) -> list[DecisionTree]:
    """Bagged Gini trees; each tree has its own RNG stream spawned from ``seed``."""
    n, p = X.shape
    if n == 0:
        raise ValueError("cannot fit a random forest on an empty training set")
    if mtry is None:
        mtry = math.ceil(math.sqrt(p))
    mtry = max(1, min(mtry, p))
    order = presort(X)
    yf = np.asarray(y, dtype=np.float64)
    trees = []
    for rng in _tree_seeds(seed, n_trees):
        counts = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)
        node_seed = int(rng.integers(0, 2**63 - 1))
        trees.append(
            grow_tree(X, order, counts, counts * yf, None, GINI, max_depth, min_leaf, mtry, node_seed)
        )
    return trees


def forest_proba(trees: list[DecisionTree], X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    total = np.zeros(X.shape[0])
    for tree in trees:
        total += tree.predict(X)
    return total / len(trees)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def log_loss(y: np.ndarray, raw: np.ndarray) -> float:
    """Mean logistic loss of raw scores ``raw`` (log-odds)."""
    # log(1 + e^z) - y z, computed stably
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


@dataclass
class BoostingResult:
    initial_score: float
    trees: list[DecisionTree]
    loss_curve: list[float]


def fit_gbt(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int = 200,
    max_depth: int = 3,
    shrinkage: float = 0.1,
    min_leaf: int = 5,
    subsample: float = 1.0,
    seed: int = 0,
) -> BoostingResult:
    """Binary logistic-loss gradient boosting with Newton leaf values.

    ``loss_curve[0]`` is the training loss of the constant model and
    ``loss_curve[m]`` the loss after ``m`` rounds.
    """
    n, _ = X.shape
    yf = np.asarray(y, dtype=np.float64)
    n_late = float(yf.sum())
    if n_late == 0 or n_late == n:
        raise ValueError("gradient boosting needs both classes in the training set")
    if not 0 < subsample <= 1:
        raise ValueError("subsample must be in (0, 1]")
    f0 = math.log(n_late / (n - n_late))
    raw = np.full(n, f0)
    curve = [log_loss(yf, raw)]
    trees: list[DecisionTree] = []
    if shrinkage == 0:
        return BoostingResult(f0, trees, curve)
    X = np.ascontiguousarray(X, dtype=np.float64)
    order = presort(X)
    rng = np.random.default_rng(seed)
    ones = np.ones(n)
    for _ in range(n_trees):
        prob = sigmoid(raw)
        grad = yf - prob
        hess = prob * (1.0 - prob)
        weight = ones
        if subsample < 1.0:
            weight = (rng.random(n) < subsample).astype(np.float64)
        tree = grow_tree(
            X, order, weight, grad * weight, hess * weight, NEWTON, max_depth, min_leaf, X.shape[1], 0
        )
        trees.append(tree)
        raw = raw + shrinkage * tree.predict(X)
        curve.append(log_loss(yf, raw))
    return BoostingResult(f0, trees, curve)


def gbt_raw(initial_score: float, shrinkage: float, trees: list[DecisionTree], X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    raw = np.full(X.shape[0], initial_score)
    for tree in trees:
        raw += shrinkage * tree.predict(X)
    return raw
