"""Risk-weighted customer prioritization and Kendall's tau agreement.

An open invoice carries risk ``amount * p_late``; a customer's risk is the
mean over its open invoices. The greedy comparator ranks customers by open
amount alone.
"""

from __future__ import annotations

import csv
import decimal
import math
from dataclasses import dataclass
from datetime import date
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from arcollect.domain import DEFAULT_POLICY, ArcollectError, GracePolicy, Invoice
from arcollect.features import ImputationStats, extract_features, impute
from arcollect.ingest import InvoiceDataset, format_amount

GREEDY_BASES = ("mean", "total")


class RankingError(ArcollectError):
    pass


# Wide enough that products and means of realistic amounts are exact, so a
# common probability factor or amount scale never reorders customers.
_EXACT = decimal.Context(prec=80)


def invoice_risk(amount, p_late: float) -> Decimal:
    """``amount * p_late``, with the probability taken at its shortest decimal repr."""
    p_late = float(p_late)
    if not 0.0 <= p_late <= 1.0:
        raise RankingError(f"probability {p_late} outside [0, 1]")
    if not amount > 0:
        raise RankingError("invoice amount must be positive")
    return _EXACT.multiply(Decimal(amount), Decimal(repr(p_late)))


def customer_risk(risks: Sequence[Decimal]) -> Decimal:
    if not risks:
        raise RankingError("a customer needs at least one open invoice")
    total = Decimal(0)
    for r in risks:
        total = _EXACT.add(total, r)
    return _EXACT.divide(total, len(risks))


@dataclass(frozen=True)
class OpenInvoice:
    customer_id: str
    amount: Decimal
    p_late: float


@dataclass(frozen=True)
class RankedEntry:
    customer_id: str
    risk_score: Decimal
    total_open_amount: Decimal
    n_open_invoices: int
    risk_rank: int
    greedy_rank: int


@dataclass(frozen=True)
class RankedList:
    as_of: Optional[date]
    entries: tuple[RankedEntry, ...]
    greedy_basis: str = "mean"

    def __len__(self) -> int:
        return len(self.entries)

    def risk_order(self) -> list[str]:
        return [e.customer_id for e in sorted(self.entries, key=lambda e: e.risk_rank)]

    def greedy_order(self) -> list[str]:
        return [e.customer_id for e in sorted(self.entries, key=lambda e: e.greedy_rank)]

    def greedy_scores(self) -> list[Decimal]:
        if self.greedy_basis == "total":
            return [e.total_open_amount for e in self.entries]
        return [_EXACT.divide(e.total_open_amount, e.n_open_invoices) for e in self.entries]

    def tau(self) -> Optional[float]:
        """Tau-b between customer risk scores and greedy scores; None if undefined."""
        if len(self.entries) < 2:
            return None
        try:
            return kendall_tau([e.risk_score for e in self.entries], self.greedy_scores())
        except RankingError:
            return None


def rank_customers(
    invoices: Iterable[OpenInvoice], as_of: Optional[date] = None, greedy_basis: str = "mean"
) -> RankedList:
    """Aggregate open-invoice risk per customer and produce both orderings.

    ``greedy_basis`` selects the greedy key: ``"mean"`` open amount per
    invoice (the same aggregation as the risk score, so a constant
    probability reproduces the greedy order) or ``"total"`` open amount.
    Ties are broken by ascending customer id.
    """
    if greedy_basis not in GREEDY_BASES:
        raise RankingError(f"greedy_basis must be one of {GREEDY_BASES}")
    risks: dict[str, list[Decimal]] = {}
    totals: dict[str, Decimal] = {}
    for item in invoices:
        risks.setdefault(item.customer_id, []).append(invoice_risk(item.amount, item.p_late))
        totals[item.customer_id] = _EXACT.add(totals.get(item.customer_id, Decimal(0)), Decimal(item.amount))

    customers = sorted(risks)
    scores = {c: customer_risk(risks[c]) for c in customers}
    if greedy_basis == "total":
        greedy_key = {c: totals[c] for c in customers}
    else:
        greedy_key = {c: _EXACT.divide(totals[c], len(risks[c])) for c in customers}
    by_risk = sorted(customers, key=lambda c: (-scores[c], c))
    by_greedy = sorted(customers, key=lambda c: (-greedy_key[c], c))
    risk_rank = {c: i + 1 for i, c in enumerate(by_risk)}
    greedy_rank = {c: i + 1 for i, c in enumerate(by_greedy)}
    entries = tuple(
        RankedEntry(c, scores[c], totals[c], len(risks[c]), risk_rank[c], greedy_rank[c])
        for c in by_risk
    )
    return RankedList(as_of, entries, greedy_basis)


def open_invoices(ds: InvoiceDataset, as_of: date) -> list[Invoice]:
    """Invoices created on or before ``as_of`` with no payment known before ``as_of``."""
    return [
        inv
        for inv in ds.invoices
        if inv.creation_date <= as_of and (inv.payment_date is None or inv.payment_date >= as_of)
    ]


def build_ranked_list(
    ds: InvoiceDataset,
    model,
    as_of: date,
    w: int,
    policy: GracePolicy = DEFAULT_POLICY,
    imputation: Optional[ImputationStats] = None,
    greedy_basis: str = "mean",
) -> RankedList:
    """Score every open invoice with features taken at its own creation date and rank customers."""
    from arcollect.models import predict_proba  # local: models imports features

    pending = open_invoices(ds, as_of)
    if not pending:
        return RankedList(as_of, (), greedy_basis)
    if imputation is None and "imputation" in model.metadata:
        imputation = ImputationStats.from_dict(model.metadata["imputation"])
    include_ratios = "ratio_paid_late" in model.feature_names
    rows = [extract_features(ds, inv, w, policy, include_ratios) for inv in pending]
    if imputation is not None:
        rows = [impute(r, imputation) for r in rows]
    X = np.asarray([[float(getattr(r, n)) for n in model.feature_names] for r in rows])
    probs = predict_proba(model, X)
    items = [OpenInvoice(inv.customer_id, inv.amount, float(p)) for inv, p in zip(pending, probs)]
    return rank_customers(items, as_of, greedy_basis)


# -- Kendall's tau -----------------------------------------------------------------


def _tie_pairs(values: Sequence) -> int:
    total = 0
    run = 1
    for i in range(1, len(values)):
        if values[i] == values[i - 1]:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    return total + run * (run - 1) // 2


def _count_inversions(seq: list) -> int:
    """Pairs i < j with seq[i] > seq[j], by bottom-up merge sort."""
    n = len(seq)
    buf = list(seq)
    tmp = [None] * n
    inversions = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if buf[j] < buf[i]:
                    tmp[k] = buf[j]
                    inversions += mid - i
                    j += 1
                else:
                    tmp[k] = buf[i]
                    i += 1
                k += 1
            tmp[k:hi] = buf[i:mid] + buf[j:hi]
        buf, tmp = tmp, buf
        width *= 2
    return inversions


def kendall_tau(x: Sequence, y: Sequence) -> float:
    """Tau-b between paired observations ``x`` and ``y`` in O(n log n).

    Without ties this is (concordant - discordant) / (n(n-1)/2).
    """
    if len(x) != len(y):
        raise RankingError("kendall_tau needs equal-length inputs")
    n = len(x)
    if n < 2:
        raise RankingError("kendall_tau needs at least two items")
    pairs = sorted(zip(x, y))
    xs = [p[0] for p in pairs]
    ys = [p[1] for p in pairs]
    n0 = n * (n - 1) // 2
    tied_x = _tie_pairs(xs)
    tied_xy = _tie_pairs(pairs)
    swaps = _count_inversions(ys)
    tied_y = _tie_pairs(sorted(ys))
    den = (n0 - tied_x) * (n0 - tied_y)
    if den == 0:
        raise RankingError("kendall_tau is undefined when either input is constant")
    return (n0 - tied_x - tied_y + tied_xy - 2 * swaps) / math.sqrt(den)


def kendall_tau_orders(order_a: Sequence[str], order_b: Sequence[str]) -> float:
    """Tau between two orderings (most important first) of the same items."""
    if len(order_a) != len(set(order_a)) or len(order_b) != len(set(order_b)):
        raise RankingError("orders must not repeat items")
    if set(order_a) != set(order_b):
        raise RankingError("orders must contain the same items")
    pos_b = {item: i for i, item in enumerate(order_b)}
    return kendall_tau(list(range(len(order_a))), [pos_b[item] for item in order_a])


def write_ranking_csv(ranked: RankedList, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["customer_id", "risk_score", "total_open_amount", "n_open_invoices", "risk_rank", "greedy_rank"])
        for e in ranked.entries:
            w.writerow(
                [e.customer_id, format(e.risk_score, "f"), format_amount(e.total_open_amount), e.n_open_invoices, e.risk_rank, e.greedy_rank]
            )
