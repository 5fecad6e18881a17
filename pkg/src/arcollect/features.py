"""Windowed payment-history features computed at invoice creation time.

Every feature only sees what was knowable strictly before the invoice's
creation date, over a look-back window of ``w`` calendar months.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import statistics
from dataclasses import dataclass
from datetime import date, timedelta
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from arcollect.domain import (
    DEFAULT_POLICY,
    GracePolicy,
    Invoice,
    PaymentLabel,
    days_late,
    label_invoice,
    subtract_months,
)
from arcollect.ingest import InvoiceDataset, format_amount, history_before

CENSORED = "censored"

# Model input columns, in order. ``label``/ids are not features.
BASE_FEATURES = (
    "amount",
    "paid_invoice_1",
    "paid_invoice_2",
    "paid_invoice_3",
    "total_paid_invoices",
    "sum_amount_paid_invoices",
    "total_invoices_late",
    "sum_amount_late_invoices",
    "total_outstanding_invoices",
    "total_outstanding_late",
    "sum_total_outstanding",
    "sum_late_outstanding",
    "average_days_late",
    "average_days_outstanding_late",
    "std_dev_invoices_late",
    "std_dev_outstanding_late",
    "payment_frequency",
)
RATIO_FEATURES = ("ratio_paid_late", "ratio_outstanding_late")
# Fields that may be missing before imputation; filled with training means.
DAY_STAT_FEATURES = (
    "average_days_late",
    "average_days_outstanding_late",
    "std_dev_invoices_late",
    "std_dev_outstanding_late",
)


def feature_names(include_ratios: bool = False) -> tuple[str, ...]:
    return BASE_FEATURES + RATIO_FEATURES if include_ratios else BASE_FEATURES


@dataclass(frozen=True)
class FeatureRow:
    invoice_id: str
    creation_date: date
    amount: Decimal
    paid_invoice_1: int
    paid_invoice_2: int
    paid_invoice_3: int
    total_paid_invoices: int
    sum_amount_paid_invoices: Decimal
    total_invoices_late: int
    sum_amount_late_invoices: Decimal
    total_outstanding_invoices: int
    total_outstanding_late: int
    sum_total_outstanding: Decimal
    sum_late_outstanding: Decimal
    average_days_late: Optional[float]
    average_days_outstanding_late: Optional[float]
    std_dev_invoices_late: Optional[float]
    std_dev_outstanding_late: Optional[float]
    payment_frequency: int
    label: str  # "late", "ontime" or "censored"
    customer_id: str = ""
    ratio_paid_late: Optional[float] = None
    ratio_outstanding_late: Optional[float] = None

    @property
    def is_labeled(self) -> bool:
        return self.label != CENSORED

    @property
    def is_late(self) -> bool:
        return self.label == PaymentLabel.LATE.value

    def is_complete(self, include_ratios: bool = False) -> bool:
        return all(getattr(self, name) is not None for name in feature_names(include_ratios))

    def vector(self, include_ratios: bool = False) -> list[float]:
        return [float(getattr(self, name)) for name in feature_names(include_ratios)]


def _true_label(inv: Invoice, policy: GracePolicy) -> str:
    if inv.payment_date is None:
        return CENSORED
    return label_invoice(inv, policy).value


def _indicator(inv: Invoice, cutoff: date, policy: GracePolicy) -> int:
    # inv is already truncated at cutoff
    if inv.payment_date is not None:
        return 1 if label_invoice(inv, policy) is PaymentLabel.ON_TIME else 0
    if days_late(inv, cutoff) > policy.grace_days:
        return 0
    return -1


def _mean(values: list[int]) -> Optional[float]:
    return statistics.fmean(values) if values else None


def _pstdev(values: list[int]) -> Optional[float]:
    return statistics.pstdev(values) if len(values) >= 2 else None


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def extract_features(
    ds: InvoiceDataset,
    inv: Invoice,
    w: int,
    policy: GracePolicy = DEFAULT_POLICY,
    include_ratios: bool = False,
) -> FeatureRow:
    """Feature row for ``inv`` using the customer's previous ``w`` months of invoices."""
    if w < 1:
        raise ValueError("window must be >= 1 month")
    cutoff = inv.creation_date
    history = history_before(ds, inv.customer_id, cutoff, subtract_months(cutoff, w))

    n_paid = n_late = n_out = n_out_late = 0
    sum_paid = sum_late = sum_out = sum_out_late = Decimal(0)
    late_days: list[int] = []
    out_late_days: list[int] = []
    for h in history:
        if h.payment_date is not None:
            n_paid += 1
            sum_paid += h.amount
            d = (h.payment_date - h.due_date).days
            if d > policy.grace_days:
                n_late += 1
                sum_late += h.amount
                late_days.append(d)
        else:
            n_out += 1
            sum_out += h.amount
            d = (cutoff - h.due_date).days
            if d > policy.grace_days:
                n_out_late += 1
                sum_out_late += h.amount
                out_late_days.append(d)

    indicators = [_indicator(h, cutoff, policy) for h in history[-1:-4:-1]]
    indicators += [-1] * (3 - len(indicators))

    return FeatureRow(
        invoice_id=inv.invoice_id,
        creation_date=inv.creation_date,
        amount=inv.amount,
        paid_invoice_1=indicators[0],
        paid_invoice_2=indicators[1],
        paid_invoice_3=indicators[2],
        total_paid_invoices=n_paid,
        sum_amount_paid_invoices=sum_paid,
        total_invoices_late=n_late,
        sum_amount_late_invoices=sum_late,
        total_outstanding_invoices=n_out,
        total_outstanding_late=n_out_late,
        sum_total_outstanding=sum_out,
        sum_late_outstanding=sum_out_late,
        average_days_late=_mean(late_days),
        average_days_outstanding_late=_mean(out_late_days),
        std_dev_invoices_late=_pstdev(late_days),
        std_dev_outstanding_late=_pstdev(out_late_days),
        payment_frequency=n_paid,
        label=_true_label(inv, policy),
        customer_id=inv.customer_id,
        ratio_paid_late=_ratio(n_late, n_paid) if include_ratios else None,
        ratio_outstanding_late=_ratio(n_out_late, n_out) if include_ratios else None,
    )


def extract_features_oracle(
    invoices: Iterable[Invoice],
    inv: Invoice,
    w: int,
    policy: GracePolicy = DEFAULT_POLICY,
    include_ratios: bool = False,
) -> FeatureRow:
    """Reference implementation: a full scan with no index, used only by tests."""
    cutoff = inv.creation_date
    start = subtract_months(cutoff, w)
    paid, late, outstanding, outstanding_late = [], [], [], []
    customer = inv.customer_id
    window = [o for o in invoices if o.customer_id == customer and start <= o.creation_date < cutoff]
    for other in window:
        known_paid = other.payment_date is not None and other.payment_date < cutoff
        if known_paid:
            paid.append(other)
            if other.payment_date > other.due_date + timedelta(days=policy.grace_days):
                late.append(other)
        else:
            outstanding.append(other)
            if cutoff > other.due_date + timedelta(days=policy.grace_days):
                outstanding_late.append(other)

    late_days = [(o.payment_date - o.due_date).days for o in late]
    out_late_days = [(cutoff - o.due_date).days for o in outstanding_late]

    window.sort(key=lambda o: (o.creation_date, o.invoice_id), reverse=True)
    flags = []
    for k in range(3):
        if k >= len(window):
            flags.append(-1)
        elif window[k] in late or window[k] in outstanding_late:
            flags.append(0)
        elif window[k] in paid:
            flags.append(1)
        else:
            flags.append(-1)

    return FeatureRow(
        invoice_id=inv.invoice_id,
        creation_date=inv.creation_date,
        amount=inv.amount,
        paid_invoice_1=flags[0],
        paid_invoice_2=flags[1],
        paid_invoice_3=flags[2],
        total_paid_invoices=len(paid),
        sum_amount_paid_invoices=sum((o.amount for o in paid), Decimal(0)),
        total_invoices_late=len(late),
        sum_amount_late_invoices=sum((o.amount for o in late), Decimal(0)),
        total_outstanding_invoices=len(outstanding),
        total_outstanding_late=len(outstanding_late),
        sum_total_outstanding=sum((o.amount for o in outstanding), Decimal(0)),
        sum_late_outstanding=sum((o.amount for o in outstanding_late), Decimal(0)),
        average_days_late=statistics.fmean(late_days) if late_days else None,
        average_days_outstanding_late=statistics.fmean(out_late_days) if out_late_days else None,
        std_dev_invoices_late=statistics.pstdev(late_days) if len(late_days) > 1 else None,
        std_dev_outstanding_late=statistics.pstdev(out_late_days) if len(out_late_days) > 1 else None,
        payment_frequency=len(paid),
        label=CENSORED if inv.payment_date is None else label_invoice(inv, policy).value,
        customer_id=inv.customer_id,
        ratio_paid_late=(len(late) / len(paid) if paid else None) if include_ratios else None,
        ratio_outstanding_late=(
            (len(outstanding_late) / len(outstanding) if outstanding else None)
            if include_ratios
            else None
        ),
    )


def extract_all(
    ds: InvoiceDataset,
    w: int,
    policy: GracePolicy = DEFAULT_POLICY,
    include_ratios: bool = False,
    invoices: Optional[Iterable[Invoice]] = None,
) -> list[FeatureRow]:
    """Feature rows for every invoice (or the given subset), in dataset order."""
    targets = ds.invoices if invoices is None else invoices
    return [extract_features(ds, inv, w, policy, include_ratios) for inv in targets]


@dataclass(frozen=True)
class ImputationStats:
    """Training-set means of the day statistics, keyed by field name."""

    means: dict[str, float]

    def to_dict(self) -> dict[str, float]:
        return dict(self.means)

    @classmethod
    def from_dict(cls, data: dict[str, float]) -> "ImputationStats":
        return cls({k: float(v) for k, v in data.items()})


def fit_imputation(rows: Sequence[FeatureRow], include_ratios: bool = False) -> ImputationStats:
    if not rows:
        raise ValueError("cannot fit imputation on an empty training set")
    fields = DAY_STAT_FEATURES + (RATIO_FEATURES if include_ratios else ())
    means = {}
    for name in fields:
        present = [getattr(r, name) for r in rows if getattr(r, name) is not None]
        means[name] = statistics.fmean(present) if present else 0.0
    return ImputationStats(means)


def impute(row: FeatureRow, stats: ImputationStats) -> FeatureRow:
    """Fill the missing day statistics (and ratios, if fitted) with training means."""
    updates = {
        name: mean for name, mean in stats.means.items() if getattr(row, name) is None
    }
    return dataclasses.replace(row, **updates) if updates else row


def to_matrix(
    rows: Sequence[FeatureRow], include_ratios: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Stack imputed rows into ``(X, y)``; ``y`` is 1 for Late, 0 otherwise."""
    names = feature_names(include_ratios)
    X = np.empty((len(rows), len(names)), dtype=np.float64)
    for i, r in enumerate(rows):
        for j, name in enumerate(names):
            v = getattr(r, name)
            if v is None:
                raise ValueError(f"row {r.invoice_id}: feature {name} missing; impute first")
            X[i, j] = float(v)
    y = np.fromiter((r.is_late for r in rows), dtype=np.int8, count=len(rows))
    return X, y


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, Decimal):
        return format_amount(v)
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    if isinstance(v, date):
        return v.isoformat()
    return str(v)


def write_feature_csv(
    rows: Sequence[FeatureRow], path: str | Path, include_ratios: bool = False
) -> None:
    """One row per invoice ordered by (creation_date, invoice_id); missing values blank."""
    columns = ("invoice_id", "creation_date") + feature_names(include_ratios) + ("label",)
    ordered = sorted(rows, key=lambda r: (r.creation_date, r.invoice_id))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in ordered:
            writer.writerow([_cell(getattr(r, c)) for c in columns])
