import json
import math

import numpy as np
import pytest

from arcollect import models
from arcollect.domain import PaymentLabel
from arcollect.models import ModelError, ModelFormatError, TrainedModel
from arcollect.models.bayes import fit_naive_bayes, naive_bayes_proba
from arcollect.models.knn import knn_proba
from arcollect.models.linear import StandardizationStats, fit_logistic, logistic_proba, loss_and_grad
from arcollect.models.trees import fit_random_forest, forest_proba, grow_tree, presort, GINI
from helpers import smoke_matrices

FAST = {
    "random_forest": {"n_trees": 15, "max_depth": 8},
    "gbt": {"n_trees": 25},
    "ensemble": {"random_forest": {"n_trees": 15, "max_depth": 8}, "gbt": {"n_trees": 25}},
}


@pytest.fixture(scope="module")
def smoke():
    return smoke_matrices()


def fit(kind, data, seed=0):
    return models.train_model(kind, data.X["train"], data.y["train"], FAST.get(kind), seed, data.feature_names)


def separable(n=60, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    y = (X[:, 1] > 0.2).astype(np.int8)
    return X, y


# -- logistic regression ------------------------------------------------------------


def central_difference(f, theta, h=1e-6):
    out = np.empty_like(theta)
    for j in range(len(theta)):
        e = np.zeros_like(theta)
        e[j] = h
        out[j] = (f(theta + e) - f(theta - e)) / (2 * h)
    return out


def test_logistic_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(80, 5))
    y = (rng.random(80) < 0.4).astype(float)
    for _ in range(5):
        theta = rng.normal(scale=0.7, size=6)
        _, grad = loss_and_grad(theta, X, y, 0.3)
        numeric = central_difference(lambda t: loss_and_grad(t, X, y, 0.3)[0], theta)
        assert np.linalg.norm(grad - numeric) <= 1e-5 * max(np.linalg.norm(numeric), 1e-12)


def test_logistic_zero_weights_give_half():
    assert np.all(logistic_proba(np.zeros(3), 0.0, np.ones((4, 3))) == 0.5)


def test_logistic_saturates_on_single_class():
    X, _ = separable()
    w, b, _ = fit_logistic(X, np.ones(len(X)), lr=0.5, max_iters=5000, l2=0.0)
    assert logistic_proba(w, b, X).min() >= 0.99


def test_logistic_divergence_is_reported():
    X, y = separable()
    with pytest.raises(ModelError, match="smaller lr"):
        models.train_logistic_regression(X, y, lr=1e306, max_iters=50)


def test_standardization_keeps_constant_features_finite():
    X = np.column_stack([np.arange(5.0), np.full(5, 3.0)])
    stats = StandardizationStats.fit(X)
    Z = stats.transform(X)
    assert np.all(Z[:, 1] == 0) and abs(Z[:, 0].std() - 1) < 1e-12
    assert StandardizationStats.from_dict(stats.to_dict()).transform(X).tolist() == Z.tolist()


# -- naive Bayes ------------------------------------------------------------------------


def test_naive_bayes_returns_prior_for_identical_classes():
    rng = np.random.default_rng(2)
    block = rng.normal(size=(25, 4))
    X = np.vstack([block, block, block, block])
    y = np.array([1] * 75 + [0] * 25, dtype=np.int8)
    p = naive_bayes_proba(fit_naive_bayes(X, y), rng.normal(size=(50, 4)) * 3)
    assert np.max(np.abs(p - 0.75)) <= 1e-9


def test_naive_bayes_separating_feature():
    X = np.array([[0.0], [0.1], [-0.1], [10.0], [10.1], [9.9]])
    y = np.array([0, 0, 0, 1, 1, 1], dtype=np.int8)
    p = naive_bayes_proba(fit_naive_bayes(X, y), np.array([[10.0], [0.0]]))
    assert p[0] > 0.999999 and p[1] < 1e-6


def test_naive_bayes_zero_variance_feature_is_floored():
    X = np.column_stack([np.ones(6), [0, 1, 2, 3, 4, 5.0]])
    y = np.array([0, 0, 0, 1, 1, 1], dtype=np.int8)
    p = naive_bayes_proba(fit_naive_bayes(X, y), np.array([[2.0, 2.5], [1.0, 4.0]]))
    assert np.all(np.isfinite(p))


# -- kNN --------------------------------------------------------------------------------


def test_knn_counts_nearest_labels():
    train = np.array([[0.0], [1.0], [2.0], [10.0]])
    labels = np.array([1, 1, 0, 0], dtype=np.int8)
    assert knn_proba(train, labels, 3, np.array([[0.9]]))[0] == pytest.approx(2 / 3)
    assert knn_proba(train, labels, 1, np.array([[10.0]]))[0] == 0.0
    assert np.all(knn_proba(train, labels, 4, np.array([[-5.0], [50.0]])) == 0.5)


def test_knn_ties_go_to_lower_training_index():
    train = np.array([[1.0], [-1.0], [1.0]])
    labels = np.array([1, 0, 0], dtype=np.int8)
    # all three are at distance 1 from the origin; k=1 must pick row 0
    assert knn_proba(train, labels, 1, np.array([[0.0]]))[0] == 1.0
    assert knn_proba(train, labels, 2, np.array([[0.0]]))[0] == 0.5


def test_knn_rejects_k_above_training_size():
    X, y = separable(10)
    with pytest.raises(ModelError):
        models.train_knn(X, y, k=11)


# -- trees ------------------------------------------------------------------------------


def test_single_tree_fits_separable_data():
    X, y = separable()
    n = len(y)
    tree = grow_tree(X, presort(X), np.ones(n), y.astype(float), np.zeros(n), GINI, 16, 1, 3, 0)
    assert np.all((tree.predict(X) >= 0.5) == (y == 1))
    assert tree.depth() == 1


def test_forest_averages_its_trees():
    X, y = separable(200)
    trees = fit_random_forest(X, y, n_trees=2, max_depth=4, min_leaf=5, mtry=3, seed=3)
    np.testing.assert_array_equal(forest_proba(trees, X), (trees[0].predict(X) + trees[1].predict(X)) / 2)


def test_forest_and_boosting_are_deterministic(smoke):
    for kind in ("random_forest", "gbt", "ensemble"):
        assert models.dumps(fit(kind, smoke, seed=5)) == models.dumps(fit(kind, smoke, seed=5))
    assert models.dumps(fit("random_forest", smoke, 5)) != models.dumps(fit("random_forest", smoke, 6))


def test_tree_models_ignore_monotone_feature_rescaling(smoke):
    X, y = smoke.X["train"], smoke.y["train"]
    Xt = X.copy()
    Xt[:, 0] = np.log1p(Xt[:, 0]) * 3 + 1
    for kind in ("random_forest", "gbt"):
        a = models.train_model(kind, X, y, FAST[kind], 1)
        b = models.train_model(kind, Xt, y, FAST[kind], 1)
        np.testing.assert_array_equal(models.predict_proba(a, X) >= 0.5, models.predict_proba(b, Xt) >= 0.5)


def test_gbt_without_rounds_predicts_base_rate(smoke):
    X, y = smoke.X["train"], smoke.y["train"]
    base = y.mean()
    for hp in ({"n_trees": 0}, {"shrinkage": 0.0}):
        p = models.predict_proba(models.train_gbt(X, y, **hp), smoke.X["test"])
        assert np.max(np.abs(p - base)) < 1e-12
    assert models.train_gbt(X, y, shrinkage=0.0).params["trees"] == []


def test_gbt_loss_never_increases(smoke):
    curve = models.train_gbt(smoke.X["train"], smoke.y["train"]).params["loss_curve"]
    assert len(curve) == 201
    assert all(b <= a for a, b in zip(curve, curve[1:]))


def test_gbt_needs_both_classes():
    X, _ = separable()
    with pytest.raises(ModelError, match="both classes"):
        models.train_gbt(X, np.ones(len(X), dtype=np.int8))


# -- ensemble, scoring --------------------------------------------------------------------


def constant_gbt(p, names=("x0",)):
    return TrainedModel("gbt", names, {"initial_score": math.log(p / (1 - p)), "shrinkage": 0.1, "trees": [], "loss_curve": []})


def test_ensemble_is_mean_of_components():
    mixed = models.combine(constant_gbt(0.4), constant_gbt(0.6))
    assert models.predict_proba(mixed, np.zeros((3, 1))) == pytest.approx([0.5] * 3, abs=1e-15)
    same = models.combine(constant_gbt(0.3), constant_gbt(0.3))
    assert models.predict_proba(same, np.zeros((2, 1))) == pytest.approx([0.3, 0.3], abs=1e-15)


def test_ensemble_auc_not_below_components(smoke):
    from arcollect.evaluation import roc_and_auc

    auc = {k: roc_and_auc(smoke.y["test"], models.predict_proba(fit(k, smoke), smoke.X["test"]))[1] for k in ("random_forest", "gbt", "ensemble")}
    assert auc["ensemble"] >= min(auc["random_forest"], auc["gbt"]) - 0.01


@pytest.mark.parametrize("p, label", [(0.5, PaymentLabel.LATE), (0.3506, PaymentLabel.ON_TIME), (0.9358, PaymentLabel.LATE)])
def test_threshold_rule(p, label):
    assert models.label_from_score(p) is label


def test_score_and_classify_rows(smoke):
    model = fit("naive_bayes", smoke)
    row = smoke.partitions.test[0]
    p = models.score(model, row)
    assert 0.0 <= p <= 1.0
    assert models.classify(model, row) is models.label_from_score(p)
    with pytest.raises(ModelError):
        models.predict_proba(model, np.zeros((1, 5)))


@pytest.mark.parametrize("kind", models.KINDS)
def test_every_kind_scores_in_unit_interval_and_round_trips(kind, smoke, tmp_path):
    model = fit(kind, smoke)
    rows = np.random.default_rng(0).choice(len(smoke.y["test"]), 100, replace=False)
    X = smoke.X["test"][rows]
    p = models.predict_proba(model, X)
    assert np.all(np.isfinite(p)) and p.min() >= 0 and p.max() <= 1
    models.save_model(model, tmp_path / "m.json")
    loaded = models.load_model(tmp_path / "m.json")
    assert np.max(np.abs(models.predict_proba(loaded, X) - p)) <= 1e-12
    assert models.dumps(loaded) == models.dumps(model)


def test_bad_model_documents(smoke, tmp_path):
    doc = json.loads(models.dumps(fit("naive_bayes", smoke)))
    doc["schema_version"] = 99
    with pytest.raises(ModelFormatError, match="schema_version"):
        models.from_document(doc)
    text = models.dumps(fit("gbt", smoke))
    (tmp_path / "cut.json").write_text(text[: len(text) // 2])
    with pytest.raises(ModelFormatError):
        models.load_model(tmp_path / "cut.json")


def test_hyperparameter_validation():
    assert models.resolve_hyperparameters("gbt")["n_trees"] == 200
    assert models.resolve_hyperparameters("random_forest")["n_trees"] == 300
    with pytest.raises(ModelError):
        models.resolve_hyperparameters("gbt", {"learning_rate": 0.1})
    with pytest.raises(ModelError):
        models.resolve_hyperparameters("svm")
