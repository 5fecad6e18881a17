import csv
import json
from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arcollect.domain import PaymentLabel
from arcollect.evaluation import (
    MetricError,
    average_ranks,
    confusion_and_accuracy,
    evaluate,
    majority_baseline,
    monthly_accuracy,
    roc_and_auc,
    write_json,
    write_monthly_csv,
    write_roc_csv,
)

L, O = "late", "ontime"


def pair_count_auc(labels, scores) -> float:
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_confusion_examples():
    conf, acc, f1 = confusion_and_accuracy([L, L, O, O], [L, O, O, O])
    assert (conf.tp, conf.fp, conf.tn, conf.fn) == (1, 0, 2, 1)
    assert acc == 0.75 and f1 == pytest.approx(2 / 3, abs=1e-15)
    assert confusion_and_accuracy([L, O], [L, O])[1] == 1.0
    assert confusion_and_accuracy([PaymentLabel.LATE], [1])[1] == 1.0


def test_always_late_on_617_percent_late_set():
    labels = [L] * 617 + [O] * 383
    _, acc, _ = confusion_and_accuracy(labels, [L] * 1000)
    assert acc == pytest.approx(0.6170, abs=1e-15) == majority_baseline(labels)


def test_metric_input_errors():
    with pytest.raises(MetricError):
        confusion_and_accuracy([L], [L, O])
    with pytest.raises(MetricError):
        confusion_and_accuracy([], [])
    with pytest.raises(MetricError):
        confusion_and_accuracy(["maybe"], [L])
    with pytest.raises(MetricError, match="both classes"):
        roc_and_auc([1, 1], [0.3, 0.4])


@pytest.mark.parametrize(
    "labels, scores, expected",
    [
        ([1, 1, 0, 0], [0.9, 0.8, 0.2, 0.1], 1.0),
        ([1, 0, 1, 0], [0.5, 0.5, 0.5, 0.5], 0.5),
        ([1, 1, 0, 0], [0.9, 0.45, 0.4, 0.5], 0.75),
    ],
)
def test_auc_examples(labels, scores, expected):
    assert roc_and_auc(labels, scores)[1] == expected


def test_average_ranks_share_ties():
    assert average_ranks(np.array([3.0, 1.0, 3.0, 2.0])).tolist() == [3.5, 1.0, 3.5, 2.0]


labelled_scores = st.integers(2, 120).flatmap(
    lambda n: st.tuples(
        st.lists(st.booleans(), min_size=n, max_size=n).filter(lambda ys: 0 < sum(ys) < len(ys)),
        st.lists(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 1.0]) | st.floats(0, 1), min_size=n, max_size=n),
    )
)


@settings(max_examples=150, deadline=None)
@given(labelled_scores)
def test_auc_equals_pair_count_and_trapezoid(case):
    labels, scores = case
    curve, auc = roc_and_auc(labels, scores)
    assert abs(auc - pair_count_auc(labels, scores)) <= 1e-12
    assert abs(curve.trapezoid_area() - auc) <= 1e-12
    assert curve.points()[0] == (0.0, 0.0) and curve.points()[-1] == (1.0, 1.0)
    assert np.all(np.diff(curve.fpr) >= 0) and np.all(np.diff(curve.tpr) >= 0)
    assert len(curve.fpr) == len(set(scores)) + 1


@settings(max_examples=50, deadline=None)
@given(labelled_scores)
def test_auc_ignores_increasing_transforms(case):
    labels, scores = case
    s = np.asarray(scores)
    # scaling by a power of two and an order-preserving remap onto rank keys are exact in floating point
    ranks = np.searchsorted(np.unique(s), s)
    for t in (4.0 * s, np.exp(ranks / 7.0) - 3.0):
        assert roc_and_auc(labels, t)[1] == roc_and_auc(labels, s)[1]


def test_monthly_examples():
    jan, feb = date(2019, 1, 15), date(2019, 2, 3)
    one = monthly_accuracy([L, O, L], [L, O, O], [jan] * 3)
    assert len(one) == 1 and one[0].accuracy == confusion_and_accuracy([L, O, L], [L, O, O])[1]
    two = monthly_accuracy([L, O, L, O], [L, O, O, O], [jan, jan, feb, feb])
    assert [m.accuracy for m in two] == [1.0, 0.5]
    assert [m.month for m in two] == ["2019-01", "2019-02"]
    allate = monthly_accuracy([L, L], [L, L], [feb, feb])[0]
    assert (allate.accuracy, allate.baseline) == (1.0, 1.0)


def test_evaluate_report(tmp_path):
    labels = [1, 1, 0, 0, 1]
    scores = [0.9, 0.4, 0.5, 0.1, 0.7]
    dates = [date(2019, 1, 1), date(2019, 1, 2), date(2019, 2, 1), date(2019, 2, 2), date(2019, 3, 1)]
    rep = evaluate(labels, scores, dates)
    assert (rep.tp, rep.fp, rep.tn, rep.fn) == (2, 1, 1, 1)
    assert rep.accuracy == 0.6 and rep.baseline == 0.6 and rep.late_share == 0.6
    assert rep.auc == pair_count_auc(labels, scores)
    write_json(rep.to_dict(), tmp_path / "m.json")
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["baseline"] == 0.6 and len(doc["monthly"]) == 3
    write_roc_csv(roc_and_auc(labels, scores)[0], tmp_path / "roc.csv")
    write_monthly_csv(rep.monthly, tmp_path / "monthly.csv")
    with open(tmp_path / "roc.csv", newline="") as fh:
        assert next(csv.reader(fh)) == ["fpr", "tpr"]
    with open(tmp_path / "monthly.csv", newline="") as fh:
        assert next(csv.reader(fh)) == ["month", "n", "accuracy", "baseline"]
