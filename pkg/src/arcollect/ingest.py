"""Invoice CSV ingestion, validation and the per-customer history index."""

from __future__ import annotations

import bisect
import csv
import dataclasses
import logging
from dataclasses import dataclass, field
from datetime import date
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Sequence

from arcollect.domain import ArcollectError, Invoice

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "invoice_id",
    "customer_id",
    "country",
    "amount",
    "creation_date",
    "due_date",
    "payment_date",
)

# Rejection reason codes.
MISSING_FIELD = "MISSING_FIELD"
BAD_AMOUNT = "BAD_AMOUNT"
NON_POSITIVE_AMOUNT = "NON_POSITIVE_AMOUNT"
BAD_DATE = "BAD_DATE"
DUE_BEFORE_CREATION = "DUE_BEFORE_CREATION"
PAYMENT_BEFORE_CREATION = "PAYMENT_BEFORE_CREATION"
DUPLICATE_ID = "DUPLICATE_ID"


class IngestError(ArcollectError):
    """The input file cannot be read, or a strict-mode row is invalid."""


@dataclass
class ValidationReport:
    row_count: int = 0
    accepted: int = 0
    rejected: int = 0
    rejections: list[tuple[int, str]] = field(default_factory=list)

    def reject(self, row_number: int, reason: str) -> None:
        self.rejected += 1
        self.rejections.append((row_number, reason))


class InvoiceDataset:
    """Immutable collection of invoices with a chronological per-customer index.

    Invoices are ordered by ``(creation_date, invoice_id)`` both globally and
    within each customer.
    """

    def __init__(self, invoices: Iterable[Invoice]):
        ordered = sorted(invoices, key=lambda inv: (inv.creation_date, inv.invoice_id))
        seen: set[str] = set()
        for inv in ordered:
            if inv.invoice_id in seen:
                raise ValueError(f"duplicate invoice_id {inv.invoice_id!r}")
            seen.add(inv.invoice_id)
        self._invoices = tuple(ordered)
        by_customer: dict[str, list[Invoice]] = {}
        for inv in self._invoices:
            by_customer.setdefault(inv.customer_id, []).append(inv)
        self._by_customer = {c: tuple(v) for c, v in by_customer.items()}
        self._creation_ordinals = {
            c: [inv.creation_date.toordinal() for inv in v] for c, v in self._by_customer.items()
        }

    @property
    def invoices(self) -> tuple[Invoice, ...]:
        return self._invoices

    @property
    def by_customer(self) -> dict[str, tuple[Invoice, ...]]:
        return self._by_customer

    def customer_invoices(self, customer_id: str) -> tuple[Invoice, ...]:
        return self._by_customer.get(customer_id, ())

    def __len__(self) -> int:
        return len(self._invoices)

    def __iter__(self):
        return iter(self._invoices)

    def _slice(self, customer_id: str, cutoff: date, window_start: date) -> tuple[Invoice, ...]:
        ordinals = self._creation_ordinals.get(customer_id)
        if not ordinals:
            return ()
        lo = bisect.bisect_left(ordinals, window_start.toordinal())
        hi = bisect.bisect_left(ordinals, cutoff.toordinal())
        return self._by_customer[customer_id][lo:hi]


def truncate_to(inv: Invoice, cutoff: date) -> Invoice:
    """Return ``inv`` as it was known just before ``cutoff``."""
    if inv.payment_date is not None and inv.payment_date >= cutoff:
        return dataclasses.replace(inv, payment_date=None)
    return inv


def history_before(
    ds: InvoiceDataset, customer_id: str, cutoff: date, window_start: date
) -> tuple[Invoice, ...]:
    """Customer invoices created in ``[window_start, cutoff)``, knowledge-truncated at ``cutoff``.

    Payments dated on or after ``cutoff`` are reported as absent. Unknown
    customers yield an empty history.
    """
    if window_start > cutoff:
        raise ValueError("window_start must not be after cutoff")
    return tuple(truncate_to(inv, cutoff) for inv in ds._slice(customer_id, cutoff, window_start))


def _parse_date(text: str) -> date:
    return date.fromisoformat(text.strip())


def _validate_row(row: dict[str, str]) -> Invoice | str:
    """Build an Invoice from a CSV row, or return a rejection reason code."""
    for key in ("invoice_id", "customer_id", "amount", "creation_date", "due_date"):
        if not (row.get(key) or "").strip():
            return MISSING_FIELD
    try:
        amount = Decimal(row["amount"].strip())
    except InvalidOperation:
        return BAD_AMOUNT
    if not amount.is_finite():
        return BAD_AMOUNT
    if amount <= 0:
        return NON_POSITIVE_AMOUNT
    try:
        created = _parse_date(row["creation_date"])
        due = _parse_date(row["due_date"])
        paid_text = (row.get("payment_date") or "").strip()
        paid = _parse_date(paid_text) if paid_text else None
    except ValueError:
        return BAD_DATE
    if due < created:
        return DUE_BEFORE_CREATION
    if paid is not None and paid < created:
        return PAYMENT_BEFORE_CREATION
    country = (row.get("country") or "").strip() or None
    return Invoice(
        invoice_id=row["invoice_id"].strip(),
        customer_id=row["customer_id"].strip(),
        country=country,
        amount=amount,
        creation_date=created,
        due_date=due,
        payment_date=paid,
    )


def parse_csv(path: str | Path, strict: bool = False) -> tuple[InvoiceDataset, ValidationReport]:
    """Read an invoice CSV. Invalid rows are reported (or raise, in strict mode)."""
    path = Path(path)
    report = ValidationReport()
    accepted: list[Invoice] = []
    seen: set[str] = set()
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        try:
            header = reader.fieldnames
        except UnicodeDecodeError as exc:
            raise IngestError(f"{path} is not valid UTF-8") from exc
        if header is None:
            raise IngestError(f"{path} is empty")
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise IngestError(f"{path} is missing required columns: {', '.join(missing)}")
        try:
            # row numbers count the header as line 1
            for row_number, row in enumerate(reader, start=2):
                report.row_count += 1
                result = _validate_row(row)
                if isinstance(result, Invoice) and result.invoice_id in seen:
                    result = DUPLICATE_ID
                if isinstance(result, str):
                    if strict:
                        raise IngestError(f"{path}:{row_number}: invalid row ({result})")
                    report.reject(row_number, result)
                    continue
                seen.add(result.invoice_id)
                accepted.append(result)
                report.accepted += 1
        except UnicodeDecodeError as exc:
            raise IngestError(f"{path} is not valid UTF-8") from exc
    if report.rejected:
        log.warning("%s: rejected %d of %d rows", path, report.rejected, report.row_count)
    return InvoiceDataset(accepted), report


def format_amount(amount: Decimal) -> str:
    return format(amount, "f")


def write_csv(invoices: Sequence[Invoice] | InvoiceDataset, path: str | Path) -> None:
    """Write invoices in dataset order using the canonical column layout."""
    path = Path(path)
    if not isinstance(invoices, InvoiceDataset):
        invoices = InvoiceDataset(invoices)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for inv in invoices.invoices:
            writer.writerow(
                [
                    inv.invoice_id,
                    inv.customer_id,
                    inv.country or "",
                    format_amount(inv.amount),
                    inv.creation_date.isoformat(),
                    inv.due_date.isoformat(),
                    inv.payment_date.isoformat() if inv.payment_date else "",
                ]
            )
