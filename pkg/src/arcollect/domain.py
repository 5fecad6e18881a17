"""Core value types, calendar arithmetic and the payment label rule."""

from __future__ import annotations

import calendar
import enum
from dataclasses import dataclass
from datetime import date
from decimal import Decimal
from typing import Optional


class ArcollectError(Exception):
    """Base class for all library errors."""


class CensoredError(ArcollectError):
    """Raised when a label is requested for an invoice that was never paid."""


class ConfigError(ArcollectError):
    """Invalid or degenerate configuration."""


class PaymentLabel(enum.Enum):
    ON_TIME = "ontime"
    LATE = "late"

    @property
    def is_late(self) -> bool:
        return self is PaymentLabel.LATE


@dataclass(frozen=True)
class GracePolicy:
    """Days after the due date within which a payment still counts as on time."""

    grace_days: int = 5

    def __post_init__(self) -> None:
        if not isinstance(self.grace_days, int) or self.grace_days < 0:
            raise ConfigError(f"grace_days must be a non-negative integer, got {self.grace_days!r}")


DEFAULT_POLICY = GracePolicy()


@dataclass(frozen=True, slots=True)
class Invoice:
    invoice_id: str
    customer_id: str
    country: Optional[str]
    amount: Decimal
    creation_date: date
    due_date: date
    payment_date: Optional[date] = None

    def __post_init__(self) -> None:
        if not self.amount > 0:
            raise ValueError(f"invoice {self.invoice_id}: amount must be positive")
        if self.due_date < self.creation_date:
            raise ValueError(f"invoice {self.invoice_id}: due_date before creation_date")
        if self.payment_date is not None and self.payment_date < self.creation_date:
            raise ValueError(f"invoice {self.invoice_id}: payment_date before creation_date")

    @property
    def is_paid(self) -> bool:
        return self.payment_date is not None


def label_invoice(inv: Invoice, policy: GracePolicy = DEFAULT_POLICY) -> PaymentLabel:
    """Late iff the payment landed more than ``grace_days`` after the due date."""
    if inv.payment_date is None:
        raise CensoredError(f"invoice {inv.invoice_id} has no payment date")
    if (inv.payment_date - inv.due_date).days <= policy.grace_days:
        return PaymentLabel.ON_TIME
    return PaymentLabel.LATE


def days_late(inv: Invoice, as_of: date) -> int:
    """Signed whole days between the due date and payment (or ``as_of`` if still open)."""
    end = inv.payment_date if inv.payment_date is not None else as_of
    return (end - inv.due_date).days


def subtract_months(d: date, months: int) -> date:
    """Same day-of-month ``months`` earlier, clamped to the target month's last day."""
    if months < 1:
        raise ValueError("months must be >= 1")
    index = d.year * 12 + (d.month - 1) - months
    year, month = divmod(index, 12)
    month += 1
    day = min(d.day, calendar.monthrange(year, month)[1])
    return date(year, month, day)


# Month arithmetic on (year, month) pairs, used by splits and the generator.

Month = tuple[int, int]


def parse_month(text: str) -> Month:
    """Parse ``YYYY-MM``."""
    try:
        year_s, month_s = text.split("-")
        year, month = int(year_s), int(month_s)
    except ValueError:
        raise ValueError(f"invalid month {text!r}, expected YYYY-MM") from None
    if not 1 <= month <= 12 or len(year_s) != 4:
        raise ValueError(f"invalid month {text!r}, expected YYYY-MM")
    return (year, month)


def format_month(m: Month) -> str:
    return f"{m[0]:04d}-{m[1]:02d}"


def month_of(d: date) -> Month:
    return (d.year, d.month)


def month_index(m: Month) -> int:
    return m[0] * 12 + m[1] - 1


def add_months(m: Month, n: int) -> Month:
    year, month = divmod(month_index(m) + n, 12)
    return (year, month + 1)


def months_between(a: Month, b: Month) -> int:
    """Number of months from ``a`` to ``b`` (``b - a``)."""
    return month_index(b) - month_index(a)


def month_end(m: Month) -> date:
    return date(m[0], m[1], calendar.monthrange(*m)[1])
