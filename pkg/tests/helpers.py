"""Builders shared by the test modules."""

from __future__ import annotations

import calendar
import random
from datetime import date, timedelta
from decimal import Decimal
from typing import Optional

from arcollect.domain import Invoice

BASE = date(2018, 1, 1)


def inv(
    invoice_id: str,
    created: date,
    due: date,
    paid: Optional[date] = None,
    amount: str = "100.00",
    customer: str = "C1",
    country: str = "ES",
) -> Invoice:
    return Invoice(invoice_id, customer, country, Decimal(amount), created, due, paid)


def random_invoices(
    rng: random.Random,
    n: int,
    n_customers: int = 6,
    span_days: int = 420,
    unpaid_prob: float = 0.2,
    base: date = BASE,
) -> list[Invoice]:
    """Small messy invoice sets: shared creation days, month-end dates, early, late and missing payments."""
    out = []
    for i in range(n):
        created = base + timedelta(days=rng.randrange(span_days))
        if rng.random() < 0.1:
            # pile invoices onto month ends to exercise window clamping
            last = calendar.monthrange(created.year, created.month)[1]
            created = created.replace(day=rng.randint(28, last))
        due = created + timedelta(days=rng.choice((0, 10, 30, 30, 45)))
        paid = None
        if rng.random() >= unpaid_prob:
            paid = max(created, due + timedelta(days=rng.randint(-12, 60)))
        cents = rng.randint(1, 5_000_000)
        out.append(
            Invoice(
                f"I{i:05d}",
                f"C{rng.randrange(n_customers)}",
                rng.choice(("ES", "MX", "CO")),
                Decimal(cents).scaleb(-2),
                created,
                due,
                paid,
            )
        )
    return out


SMOKE_CONFIG = dict(n_customers=40, start_month="2017-07", end_month="2019-06")


def smoke_matrices(include_ratios: bool = False):
    """Train and test matrices from a small seeded synthetic stream (default split)."""
    from arcollect.experiments import prepare
    from arcollect.features import extract_all
    from arcollect.ingest import InvoiceDataset
    from arcollect.split import DEFAULT_SPLIT
    from arcollect.synth import GeneratorConfig, generate

    ds = InvoiceDataset(generate(GeneratorConfig(**SMOKE_CONFIG)))
    data = prepare(extract_all(ds, 3, include_ratios=include_ratios), 3, DEFAULT_SPLIT, include_ratios)
    return data
