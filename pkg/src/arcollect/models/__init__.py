"""Probability-scoring classifiers for late payment, their training and persistence.

Every model maps an imputed feature matrix to ``p_late`` in ``[0, 1]``.
Logistic regression and kNN standardize their inputs with statistics fitted
on the training rows; naive Bayes and the tree models consume raw features.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from arcollect.domain import ArcollectError, PaymentLabel
from arcollect.features import FeatureRow, feature_names as default_feature_names
from arcollect.models.bayes import fit_naive_bayes, naive_bayes_proba
from arcollect.models.knn import knn_proba
from arcollect.models.linear import (
    DivergenceError,
    StandardizationStats,
    fit_logistic,
    logistic_proba,
)
from arcollect.models.trees import (
    DecisionTree,
    fit_gbt,
    fit_random_forest,
    forest_proba,
    gbt_raw,
    sigmoid,
)

SCHEMA_VERSION = 1

KINDS = ("naive_bayes", "logistic_regression", "knn", "random_forest", "gbt", "ensemble")
STANDARDIZED_KINDS = ("logistic_regression", "knn")

DEFAULT_HYPERPARAMETERS: dict[str, dict[str, Any]] = {
    "naive_bayes": {},
    "logistic_regression": {"lr": 0.1, "max_iters": 2000, "l2": 1e-4, "tol": 1e-6},
    "knn": {"k": 15},
    "random_forest": {"n_trees": 300, "max_depth": 16, "min_leaf": 5, "mtry": None},
    "gbt": {"n_trees": 200, "max_depth": 3, "shrinkage": 0.1, "min_leaf": 5, "subsample": 1.0},
}
DEFAULT_HYPERPARAMETERS["ensemble"] = {
    "random_forest": dict(DEFAULT_HYPERPARAMETERS["random_forest"]),
    "gbt": dict(DEFAULT_HYPERPARAMETERS["gbt"]),
}


class ModelError(ArcollectError):
    pass


class ModelFormatError(ModelError):
    """Malformed or incompatible model document."""


@dataclass
class TrainedModel:
    kind: str
    feature_names: tuple[str, ...]
    params: dict[str, Any]
    standardization: Optional[StandardizationStats] = None
    metadata: dict[str, Any] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


def resolve_hyperparameters(kind: str, overrides: Optional[Mapping[str, Any]] = None) -> dict[str, Any]:
    """Defaults for ``kind`` updated with ``overrides``; unknown keys are rejected."""
    if kind not in KINDS:
        raise ModelError(f"unknown model kind {kind!r}; expected one of {', '.join(KINDS)}")
    params = copy.deepcopy(DEFAULT_HYPERPARAMETERS[kind])
    for key, value in (overrides or {}).items():
        if key not in params:
            raise ModelError(f"unknown hyperparameter {key!r} for {kind}")
        if kind == "ensemble":
            params[key] = resolve_hyperparameters(key, value)
        else:
            params[key] = value
    return params


def _check_training(X: np.ndarray, y: np.ndarray, names: Sequence[str]) -> None:
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ModelError("X must be 2-D with one label per row")
    if X.shape[0] == 0:
        raise ModelError("empty training set")
    if X.shape[1] != len(names):
        raise ModelError(f"X has {X.shape[1]} columns but {len(names)} feature names")
    if not np.all(np.isfinite(X)):
        raise ModelError("training matrix contains missing or non-finite values")


def _names(names: Optional[Sequence[str]], X: np.ndarray) -> tuple[str, ...]:
    if names is not None:
        return tuple(names)
    default = default_feature_names()
    if X.shape[1] == len(default):
        return default
    return tuple(f"x{j}" for j in range(X.shape[1]))


def train_naive_bayes(X, y, feature_names=None, metadata=None) -> TrainedModel:
    names = _names(feature_names, X)
    _check_training(X, y, names)
    try:
        params = fit_naive_bayes(X, y)
    except ValueError as exc:
        raise ModelError(str(exc)) from None
    return TrainedModel("naive_bayes", names, params, metadata=_meta(metadata, {}))


def train_logistic_regression(
    X, y, lr=0.1, max_iters=2000, l2=1e-4, tol=1e-6, feature_names=None, metadata=None
) -> TrainedModel:
    names = _names(feature_names, X)
    _check_training(X, y, names)
    stats = StandardizationStats.fit(X)
    try:
        w, b, iters = fit_logistic(stats.transform(X), y, lr=lr, max_iters=max_iters, l2=l2, tol=tol)
    except DivergenceError as exc:
        raise ModelError(str(exc)) from None
    hp = {"lr": lr, "max_iters": max_iters, "l2": l2, "tol": tol}
    return TrainedModel(
        "logistic_regression",
        names,
        {"weights": w, "intercept": b, "iterations": iters},
        stats,
        _meta(metadata, hp),
    )


def train_knn(X, y, k=15, feature_names=None, metadata=None) -> TrainedModel:
    names = _names(feature_names, X)
    _check_training(X, y, names)
    if not 1 <= k <= X.shape[0]:
        raise ModelError(f"k={k} must be between 1 and the training size {X.shape[0]}")
    stats = StandardizationStats.fit(X)
    params = {"k": int(k), "train_X": stats.transform(X), "train_y": np.asarray(y, dtype=np.int8)}
    return TrainedModel("knn", names, params, stats, _meta(metadata, {"k": k}))


def train_random_forest(
    X, y, n_trees=300, max_depth=16, min_leaf=5, mtry=None, seed=0, feature_names=None, metadata=None
) -> TrainedModel:
    names = _names(feature_names, X)
    _check_training(X, y, names)
    if mtry is None:
        mtry = math.ceil(math.sqrt(X.shape[1]))
    trees = fit_random_forest(X, y, n_trees, max_depth, min_leaf, mtry, seed)
    hp = {"n_trees": n_trees, "max_depth": max_depth, "min_leaf": min_leaf, "mtry": mtry, "seed": seed}
    return TrainedModel("random_forest", names, {"trees": trees}, metadata=_meta(metadata, hp))


def train_gbt(
    X,
    y,
    n_trees=200,
    max_depth=3,
    shrinkage=0.1,
    min_leaf=5,
    subsample=1.0,
    seed=0,
    feature_names=None,
    metadata=None,
) -> TrainedModel:
    names = _names(feature_names, X)
    _check_training(X, y, names)
    try:
        result = fit_gbt(X, y, n_trees, max_depth, shrinkage, min_leaf, subsample, seed)
    except ValueError as exc:
        raise ModelError(str(exc)) from None
    hp = {
        "n_trees": n_trees,
        "max_depth": max_depth,
        "shrinkage": shrinkage,
        "min_leaf": min_leaf,
        "subsample": subsample,
        "seed": seed,
    }
    params = {
        "initial_score": result.initial_score,
        "shrinkage": shrinkage,
        "trees": result.trees,
        "loss_curve": result.loss_curve,
    }
    return TrainedModel("gbt", names, params, metadata=_meta(metadata, hp))


def train_ensemble(X, y, rf=None, gbt=None, seed=0, feature_names=None, metadata=None) -> TrainedModel:
    """Unweighted mean of a random forest and a boosted model."""
    rf_hp = resolve_hyperparameters("random_forest", rf)
    gbt_hp = resolve_hyperparameters("gbt", gbt)
    forest = train_random_forest(X, y, seed=seed, feature_names=feature_names, **rf_hp)
    boosted = train_gbt(X, y, seed=seed, feature_names=feature_names, **gbt_hp)
    return combine(forest, boosted, metadata)


def combine(first: TrainedModel, second: TrainedModel, metadata=None) -> TrainedModel:
    if first.feature_names != second.feature_names:
        raise ModelError("ensemble components disagree on feature names")
    return TrainedModel(
        "ensemble", first.feature_names, {"components": [first, second]}, metadata=_meta(metadata, {})
    )


def _meta(metadata: Optional[Mapping[str, Any]], hyperparameters: dict) -> dict[str, Any]:
    out = dict(metadata or {})
    out["hyperparameters"] = hyperparameters
    return out


def train_model(
    kind: str,
    X: np.ndarray,
    y: np.ndarray,
    hyperparameters: Optional[Mapping[str, Any]] = None,
    seed: int = 0,
    feature_names: Optional[Sequence[str]] = None,
    metadata: Optional[Mapping[str, Any]] = None,
) -> TrainedModel:
    hp = resolve_hyperparameters(kind, hyperparameters)
    common = {"feature_names": feature_names, "metadata": metadata}
    if kind == "naive_bayes":
        return train_naive_bayes(X, y, **common)
    if kind == "logistic_regression":
        return train_logistic_regression(X, y, **hp, **common)
    if kind == "knn":
        return train_knn(X, y, **hp, **common)
    if kind == "random_forest":
        return train_random_forest(X, y, seed=seed, **hp, **common)
    if kind == "gbt":
        return train_gbt(X, y, seed=seed, **hp, **common)
    return train_ensemble(X, y, rf=hp["random_forest"], gbt=hp["gbt"], seed=seed, **common)


# -- scoring -----------------------------------------------------------------


def predict_proba(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise ModelError(f"model expects {model.n_features} features, got {X.shape[1]}")
    if model.standardization is not None:
        X = model.standardization.transform(X)
    kind, params = model.kind, model.params
    if kind == "naive_bayes":
        p = naive_bayes_proba(params, X)
    elif kind == "logistic_regression":
        p = logistic_proba(params["weights"], params["intercept"], X)
    elif kind == "knn":
        p = knn_proba(params["train_X"], params["train_y"], params["k"], X)
    elif kind == "random_forest":
        p = forest_proba(params["trees"], X)
    elif kind == "gbt":
        p = sigmoid(gbt_raw(params["initial_score"], params["shrinkage"], params["trees"], X))
    elif kind == "ensemble":
        a, b = params["components"]
        p = (predict_proba(a, X) + predict_proba(b, X)) / 2.0
    else:
        raise ModelError(f"unknown model kind {kind!r}")
    return np.clip(p, 0.0, 1.0)


def _row_vector(model: TrainedModel, row) -> np.ndarray:
    if isinstance(row, FeatureRow):
        values = []
        for name in model.feature_names:
            v = getattr(row, name, None)
            if v is None:
                raise ModelError(f"row {row.invoice_id}: feature {name} is missing; impute first")
            values.append(float(v))
        return np.asarray(values)
    return np.asarray(row, dtype=np.float64)


def score(model: TrainedModel, row) -> float:
    """``p_late`` for one imputed row (a FeatureRow or a feature vector)."""
    return float(predict_proba(model, _row_vector(model, row))[0])


def classify(model: TrainedModel, row, threshold: float = 0.5) -> PaymentLabel:
    return label_from_score(score(model, row), threshold)


def label_from_score(p_late: float, threshold: float = 0.5) -> PaymentLabel:
    return PaymentLabel.LATE if p_late >= threshold else PaymentLabel.ON_TIME


# -- persistence -------------------------------------------------------------


def _encode_params(model: TrainedModel) -> dict[str, Any]:
    p = model.params
    if model.kind == "naive_bayes":
        return {k: p[k].tolist() for k in ("means", "variances", "priors")}
    if model.kind == "logistic_regression":
        return {"weights": p["weights"].tolist(), "intercept": float(p["intercept"]), "iterations": int(p["iterations"])}
    if model.kind == "knn":
        return {"k": p["k"], "train_X": p["train_X"].tolist(), "train_y": p["train_y"].tolist()}
    if model.kind == "random_forest":
        return {"trees": [t.to_dict() for t in p["trees"]]}
    if model.kind == "gbt":
        return {
            "initial_score": float(p["initial_score"]),
            "shrinkage": float(p["shrinkage"]),
            "trees": [t.to_dict() for t in p["trees"]],
            "loss_curve": [float(v) for v in p["loss_curve"]],
        }
    if model.kind == "ensemble":
        return {"components": [to_document(m) for m in p["components"]]}
    raise ModelError(f"unknown model kind {model.kind!r}")


def _decode_params(kind: str, p: dict[str, Any]) -> dict[str, Any]:
    if kind == "naive_bayes":
        return {k: np.asarray(p[k], dtype=np.float64) for k in ("means", "variances", "priors")}
    if kind == "logistic_regression":
        return {
            "weights": np.asarray(p["weights"], dtype=np.float64),
            "intercept": float(p["intercept"]),
            "iterations": int(p["iterations"]),
        }
    if kind == "knn":
        return {
            "k": int(p["k"]),
            "train_X": np.asarray(p["train_X"], dtype=np.float64),
            "train_y": np.asarray(p["train_y"], dtype=np.int8),
        }
    if kind == "random_forest":
        return {"trees": [DecisionTree.from_dict(t) for t in p["trees"]]}
    if kind == "gbt":
        return {
            "initial_score": float(p["initial_score"]),
            "shrinkage": float(p["shrinkage"]),
            "trees": [DecisionTree.from_dict(t) for t in p["trees"]],
            "loss_curve": [float(v) for v in p["loss_curve"]],
        }
    if kind == "ensemble":
        components = [from_document(d) for d in p["components"]]
        if len(components) != 2:
            raise ModelFormatError("ensemble must have exactly two components")
        return {"components": components}
    raise ModelFormatError(f"unknown model kind {kind!r}")


def to_document(model: TrainedModel) -> dict[str, Any]:
    return {
        "schema_version": model.schema_version,
        "kind": model.kind,
        "feature_names": list(model.feature_names),
        "standardization": model.standardization.to_dict() if model.standardization else None,
        "params": _encode_params(model),
        "metadata": model.metadata,
    }


def from_document(doc: Any) -> TrainedModel:
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ModelFormatError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    try:
        kind = doc["kind"]
        names = tuple(doc["feature_names"])
        std = doc.get("standardization")
        model = TrainedModel(
            kind=kind,
            feature_names=names,
            params=_decode_params(kind, doc["params"]),
            standardization=StandardizationStats.from_dict(std) if std else None,
            metadata=dict(doc.get("metadata") or {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from None
    if (model.kind in STANDARDIZED_KINDS) != (model.standardization is not None):
        raise ModelFormatError(f"{model.kind} model has inconsistent standardization")
    return model


def dumps(model: TrainedModel) -> str:
    return json.dumps(to_document(model), sort_keys=True, allow_nan=False)


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(dumps(model) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from None
    return from_document(doc)
