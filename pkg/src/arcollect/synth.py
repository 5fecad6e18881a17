"""Seeded synthetic invoice stream with persistent customer behavior and drift.

Each customer draws a latent late-payment propensity from a Beta prior. An
invoice created in month ``t`` (counted from ``start_month``) is late with
probability ``sigmoid(logit(r) + drift_per_month * t + december_bump * [Dec])``.
"""

from __future__ import annotations

import calendar
import dataclasses
import math
from dataclasses import dataclass
from datetime import date, timedelta
from decimal import Decimal
from typing import Any

import numpy as np

from arcollect.domain import (
    ConfigError,
    Invoice,
    add_months,
    month_end,
    months_between,
    parse_month,
)

DUE_DAYS = 30
ON_TIME_EARLIEST = -3  # on-time payments land in [due - 3, due + grace]

# Invoice counts per country from the bank's Latin-America portfolio.
DEFAULT_COUNTRY_WEIGHTS = (
    ("AR", 337.0),
    ("BR", 46262.0),
    ("CL", 21565.0),
    ("CO", 27960.0),
    ("EC", 20.0),
    ("MX", 53010.0),
    ("PE", 25884.0),
    ("UY", 514.0),
)


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 20190630
    n_customers: int = 300
    start_month: str = "2017-07"
    end_month: str = "2019-06"
    mean_invoices_per_customer_month: float = 3.5
    amount_log_mean: float = 9.0
    amount_log_sd: float = 1.0
    reliability_alpha: float = 0.7
    reliability_beta: float = 0.5
    drift_per_month: float = -0.05
    december_bump: float = 0.7
    mean_late_delay_days: float = 20.0
    grace_days: int = 5
    country_weights: tuple[tuple[str, float], ...] = DEFAULT_COUNTRY_WEIGHTS
    # Payments after the last day of end_month are unknown at extraction time.
    censor_after_end: bool = True

    def validate(self) -> None:
        if self.n_customers < 1:
            raise ConfigError("n_customers must be positive")
        try:
            start, end = parse_month(self.start_month), parse_month(self.end_month)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if months_between(start, end) < 0:
            raise ConfigError("end_month is before start_month")
        for name in (
            "mean_invoices_per_customer_month",
            "amount_log_sd",
            "reliability_alpha",
            "reliability_beta",
            "mean_late_delay_days",
        ):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.grace_days < 0:
            raise ConfigError("grace_days must be non-negative")
        if not self.country_weights or sum(w for _, w in self.country_weights) <= 0:
            raise ConfigError("country weights must sum to a positive value")
        if any(w < 0 for _, w in self.country_weights):
            raise ConfigError("country weights must be non-negative")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "GeneratorConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown generator keys: {', '.join(sorted(unknown))}")
        data = dict(data)
        if "country_weights" in data:
            cw = data["country_weights"]
            pairs = cw.items() if isinstance(cw, dict) else cw
            data["country_weights"] = tuple((str(c), float(w)) for c, w in pairs)
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["country_weights"] = [list(p) for p in self.country_weights]
        return d


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def _sigmoid(z: float) -> float:
    return 1.0 / (1.0 + math.exp(-z))


def generate(cfg: GeneratorConfig) -> list[Invoice]:
    """Generate the invoice stream; identical config (incl. seed) gives identical output."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    start = parse_month(cfg.start_month)
    n_months = months_between(start, parse_month(cfg.end_month)) + 1
    extraction = month_end(parse_month(cfg.end_month))

    countries = [c for c, _ in cfg.country_weights]
    weights = np.array([w for _, w in cfg.country_weights], dtype=float)
    weights /= weights.sum()
    # geometric on {0, 1, ...} with the configured mean
    delay_p = 1.0 / (cfg.mean_late_delay_days + 1.0)

    width = len(str(cfg.n_customers))
    invoices: list[Invoice] = []
    counter = 0
    for c in range(cfg.n_customers):
        customer_id = f"C{c:0{width}d}"
        country = countries[rng.choice(len(countries), p=weights)]
        r = float(np.clip(rng.beta(cfg.reliability_alpha, cfg.reliability_beta), 1e-6, 1 - 1e-6))
        base = _logit(r)
        for t in range(n_months):
            year, month = add_months(start, t)
            n_days = calendar.monthrange(year, month)[1]
            p_late = _sigmoid(
                base + cfg.drift_per_month * t + (cfg.december_bump if month == 12 else 0.0)
            )
            for _ in range(rng.poisson(cfg.mean_invoices_per_customer_month)):
                created = date(year, month, int(rng.integers(1, n_days + 1)))
                due = created + timedelta(days=DUE_DAYS)
                amount = Decimal(f"{rng.lognormal(cfg.amount_log_mean, cfg.amount_log_sd):.2f}")
                if amount <= 0:
                    amount = Decimal("0.01")
                if rng.random() < p_late:
                    offset = cfg.grace_days + 1 + int(rng.geometric(delay_p)) - 1
                else:
                    offset = int(rng.integers(ON_TIME_EARLIEST, cfg.grace_days + 1))
                paid = due + timedelta(days=offset)
                if cfg.censor_after_end and paid > extraction:
                    paid = None
                counter += 1
                invoices.append(
                    Invoice(
                        invoice_id=f"INV{counter:07d}",
                        customer_id=customer_id,
                        country=country,
                        amount=amount,
                        creation_date=created,
                        due_date=due,
                        payment_date=paid,
                    )
                )
    invoices.sort(key=lambda inv: (inv.creation_date, inv.invoice_id))
    return invoices
