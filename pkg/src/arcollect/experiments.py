"""End-to-end pipeline runs: single split, window-size sweep and rolling snapshots."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from arcollect import models
from arcollect.domain import DEFAULT_POLICY, GracePolicy
from arcollect.evaluation import MetricsReport, RocCurve, evaluate, roc_and_auc
from arcollect.features import (
    FeatureRow,
    ImputationStats,
    extract_all,
    feature_names,
    fit_imputation,
    impute,
    to_matrix,
)
from arcollect.ingest import InvoiceDataset
from arcollect.split import Partitions, SplitSpec, split

log = logging.getLogger(__name__)


@dataclass
class PreparedData:
    """Imputed partitions and their matrices for one window size and split."""

    window_months: int
    spec: SplitSpec
    partitions: Partitions
    imputation: ImputationStats
    include_ratios: bool
    X: dict[str, np.ndarray] = field(default_factory=dict)
    y: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return feature_names(self.include_ratios)

    def ratios(self) -> dict[str, float]:
        sizes = {k: len(v) for k, v in self.y.items()}
        total = sum(sizes.values())
        return {k: n / total for k, n in sizes.items()}


def prepare(
    rows: Sequence[FeatureRow],
    w: int,
    spec: SplitSpec,
    include_ratios: bool = False,
) -> PreparedData:
    """Split rows in time, fit imputation on train only and impute every partition."""
    parts = split(rows, spec)
    stats = fit_imputation(parts.train, include_ratios)
    imputed = Partitions(*([impute(r, stats) for r in part] for part in parts))
    data = PreparedData(w, spec, imputed, stats, include_ratios)
    for name, part in zip(("train", "validation", "test"), imputed):
        data.X[name], data.y[name] = to_matrix(part, include_ratios)
    return data


def fit_model(
    data: PreparedData,
    kind: str,
    hyperparameters: Optional[Mapping[str, Any]] = None,
    seed: int = 0,
    grace_days: int = DEFAULT_POLICY.grace_days,
) -> models.TrainedModel:
    metadata = {
        "window_months": data.window_months,
        "grace_days": grace_days,
        "split": data.spec.to_dict(),
        "seed": seed,
        "imputation": data.imputation.to_dict(),
        "include_ratios": data.include_ratios,
    }
    return models.train_model(
        kind,
        data.X["train"],
        data.y["train"],
        hyperparameters,
        seed=seed,
        feature_names=data.feature_names,
        metadata=metadata,
    )


@dataclass
class Evaluation:
    report: MetricsReport
    roc: Optional[RocCurve]
    scores: np.ndarray


def evaluate_partition(
    model: models.TrainedModel, data: PreparedData, partition: str = "test", threshold: float = 0.5
) -> Evaluation:
    rows = getattr(data.partitions, partition)
    scores = models.predict_proba(model, data.X[partition])
    report = evaluate(data.y[partition], scores, [r.creation_date for r in rows], threshold)
    roc = roc_and_auc(data.y[partition], scores)[0] if report.auc is not None else None
    return Evaluation(report, roc, scores)


@dataclass(frozen=True)
class SweepCell:
    window_months: int
    model: str
    accuracy: float
    f1: float
    auc: Optional[float]


def window_sweep(
    ds: InvoiceDataset,
    w_range: Sequence[int],
    kinds: Sequence[str],
    spec: SplitSpec,
    policy: GracePolicy = DEFAULT_POLICY,
    hyperparameters: Optional[Mapping[str, Mapping[str, Any]]] = None,
    seed: int = 0,
    include_ratios: bool = False,
) -> list[SweepCell]:
    """Test-set accuracy for every (window size, model kind) pair."""
    if not w_range:
        raise ValueError("w_range must not be empty")
    hyperparameters = hyperparameters or {}
    cells = []
    for w in w_range:
        data = prepare(extract_all(ds, w, policy, include_ratios), w, spec, include_ratios)
        for kind in kinds:
            model = fit_model(data, kind, hyperparameters.get(kind), seed, policy.grace_days)
            rep = evaluate_partition(model, data).report
            log.info("w=%d %s accuracy=%.4f", w, kind, rep.accuracy)
            cells.append(SweepCell(w, kind, rep.accuracy, rep.f1_late, rep.auc))
    return cells


def best_window(cells: Sequence[SweepCell], kind: str) -> int:
    """Window with the highest accuracy for ``kind``; the smallest such window on ties."""
    candidates = [c for c in cells if c.model == kind]
    if not candidates:
        raise ValueError(f"no sweep cells for {kind}")
    return min(candidates, key=lambda c: (-c.accuracy, c.window_months)).window_months


@dataclass
class SnapshotReport:
    label: str
    spec: SplitSpec
    train_ratio: float
    validation_ratio: float
    test_ratio: float
    baseline: float  # Late share of the test partition
    majority_baseline: float
    accuracy: float
    f1: float
    auc: Optional[float]
    monthly: list = field(default_factory=list)


def snapshot_sweep(
    ds: InvoiceDataset,
    snapshots: Sequence[SplitSpec],
    kind: str,
    w: int = 3,
    policy: GracePolicy = DEFAULT_POLICY,
    hyperparameters: Optional[Mapping[str, Any]] = None,
    seed: int = 0,
    include_ratios: bool = False,
) -> list[SnapshotReport]:
    """Train and test ``kind`` once per snapshot; features are shared across snapshots."""
    rows = extract_all(ds, w, policy, include_ratios)
    reports = []
    for k, spec in enumerate(snapshots, start=1):
        data = prepare(rows, w, spec, include_ratios)
        model = fit_model(data, kind, hyperparameters, seed, policy.grace_days)
        rep = evaluate_partition(model, data).report
        ratios = data.ratios()
        reports.append(
            SnapshotReport(
                label=f"Set {k}",
                spec=spec,
                train_ratio=ratios["train"],
                validation_ratio=ratios["validation"],
                test_ratio=ratios["test"],
                baseline=rep.late_share,
                majority_baseline=rep.baseline,
                accuracy=rep.accuracy,
                f1=rep.f1_late,
                auc=rep.auc,
                monthly=rep.monthly,
            )
        )
    return reports


def _num(v: Optional[float]) -> str:
    return "" if v is None else repr(float(v))


def write_sweep_csv(cells: Sequence[SweepCell], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_months", "model", "accuracy", "f1", "auc"])
        for c in cells:
            w.writerow([c.window_months, c.model, _num(c.accuracy), _num(c.f1), _num(c.auc)])


def write_snapshot_csv(reports: Sequence[SnapshotReport], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(
            [
                "dataset",
                "train",
                "validation",
                "test",
                "train_ratio",
                "validation_ratio",
                "test_ratio",
                "baseline",
                "accuracy",
                "f1",
                "auc",
            ]
        )
        for r in reports:
            ranges = r.spec.to_dict()
            w.writerow(
                [
                    r.label,
                    "/".join(ranges["train"]),
                    "/".join(ranges["validation"]),
                    "/".join(ranges["test"]),
                    _num(r.train_ratio),
                    _num(r.validation_ratio),
                    _num(r.test_ratio),
                    _num(r.baseline),
                    _num(r.accuracy),
                    _num(r.f1),
                    _num(r.auc),
                ]
            )
