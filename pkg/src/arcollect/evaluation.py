"""Classification metrics: confusion counts, ROC/AUC, monthly accuracy."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from arcollect.domain import ArcollectError, PaymentLabel, format_month, month_of


class MetricError(ArcollectError):
    pass


def as_late(labels: Iterable) -> np.ndarray:
    """Boolean Late indicator from PaymentLabels, label strings, or 0/1 values."""
    out = []
    for v in labels:
        if isinstance(v, PaymentLabel):
            out.append(v is PaymentLabel.LATE)
        elif isinstance(v, str):
            if v not in ("late", "ontime"):
                raise MetricError(f"unknown label {v!r}")
            out.append(v == "late")
        else:
            out.append(bool(v))
    return np.asarray(out, dtype=bool)


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.n

    @property
    def f1_late(self) -> float:
        den = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / den if den else 0.0


def confusion_and_accuracy(labels, predictions) -> tuple[Confusion, float, float]:
    """Confusion counts with Late as the positive class, accuracy and F1 for Late."""
    y = as_late(labels)
    p = as_late(predictions)
    if len(y) != len(p):
        raise MetricError(f"length mismatch: {len(y)} labels vs {len(p)} predictions")
    if len(y) == 0:
        raise MetricError("no rows to evaluate")
    c = Confusion(
        tp=int(np.sum(y & p)),
        fp=int(np.sum(~y & p)),
        tn=int(np.sum(~y & ~p)),
        fn=int(np.sum(y & ~p)),
    )
    return c, c.accuracy, c.f1_late


def majority_baseline(labels) -> float:
    y = as_late(labels)
    if len(y) == 0:
        raise MetricError("no rows to evaluate")
    share = float(y.mean())
    return max(share, 1.0 - share)


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the mean of their positions."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    # start index of each run of equal values
    starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
    ends = np.r_[starts[1:], len(values)]
    run_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(len(values))
    ranks[order] = np.repeat(run_rank, ends - starts)
    return ranks


@dataclass(frozen=True)
class RocCurve:
    fpr: tuple[float, ...]
    tpr: tuple[float, ...]

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr, self.tpr))

    def trapezoid_area(self) -> float:
        f, t = np.asarray(self.fpr), np.asarray(self.tpr)
        return float(np.sum((f[1:] - f[:-1]) * (t[1:] + t[:-1]) / 2.0))


def roc_and_auc(labels, scores) -> tuple[RocCurve, float]:
    """ROC by a descending-score sweep with one vertex per distinct score, and rank AUC."""
    y = as_late(labels)
    s = np.asarray(scores, dtype=np.float64)
    if len(y) != len(s):
        raise MetricError(f"length mismatch: {len(y)} labels vs {len(s)} scores")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC is undefined unless both classes are present")

    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    last_of_group = np.r_[s_sorted[1:] != s_sorted[:-1], True]
    tp = np.cumsum(y_sorted)[last_of_group]
    fp = np.cumsum(~y_sorted)[last_of_group]
    curve = RocCurve(
        fpr=tuple([0.0] + (fp / n_neg).tolist()),
        tpr=tuple([0.0] + (tp / n_pos).tolist()),
    )

    ranks = average_ranks(s)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return curve, float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class MonthlyStat:
    month: str
    n: int
    accuracy: float
    baseline: float


def monthly_accuracy(labels, predictions, creation_dates: Sequence[date]) -> list[MonthlyStat]:
    """Accuracy and majority-class baseline per calendar month of creation."""
    y = as_late(labels)
    p = as_late(predictions)
    if not (len(y) == len(p) == len(creation_dates)):
        raise MetricError("labels, predictions and dates must have equal length")
    if len(y) == 0:
        raise MetricError("no rows to evaluate")
    months = np.asarray([format_month(month_of(d)) for d in creation_dates])
    out = []
    for m in sorted(set(months.tolist())):
        mask = months == m
        ym, pm = y[mask], p[mask]
        share = float(ym.mean())
        out.append(MonthlyStat(m, int(mask.sum()), float(np.mean(ym == pm)), max(share, 1.0 - share)))
    return out


@dataclass
class MetricsReport:
    n: int
    accuracy: float
    f1_late: float
    baseline: float
    late_share: float
    tp: int
    fp: int
    tn: int
    fn: int
    auc: float | None
    threshold: float = 0.5
    monthly: list[MonthlyStat] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["monthly"] = [asdict(m) for m in self.monthly]
        return d


def evaluate(labels, scores, creation_dates: Sequence[date], threshold: float = 0.5) -> MetricsReport:
    y = as_late(labels)
    s = np.asarray(scores, dtype=np.float64)
    pred = s >= threshold
    conf, acc, f1 = confusion_and_accuracy(y, pred)
    auc = roc_and_auc(y, s)[1] if 0 < y.sum() < len(y) else None
    return MetricsReport(
        n=conf.n,
        accuracy=acc,
        f1_late=f1,
        baseline=majority_baseline(y),
        late_share=float(y.mean()),
        tp=conf.tp,
        fp=conf.fp,
        tn=conf.tn,
        fn=conf.fn,
        auc=auc,
        threshold=threshold,
        monthly=monthly_accuracy(y, pred, creation_dates),
    )


# -- file outputs --------------------------------------------------------------


def write_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def write_roc_csv(curve: RocCurve, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        for f, t in curve.points():
            w.writerow([repr(f), repr(t)])


def write_monthly_csv(stats: Sequence[MonthlyStat], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["month", "n", "accuracy", "baseline"])
        for m in stats:
            w.writerow([m.month, m.n, repr(m.accuracy), repr(m.baseline)])
