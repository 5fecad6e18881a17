import calendar
from datetime import date, timedelta
from decimal import Decimal

import pytest
from hypothesis import given, strategies as st

from arcollect.domain import (
    DEFAULT_POLICY,
    CensoredError,
    ConfigError,
    GracePolicy,
    Invoice,
    PaymentLabel,
    add_months,
    days_late,
    format_month,
    label_invoice,
    month_end,
    months_between,
    parse_month,
    subtract_months,
)
from helpers import inv

D = date.fromisoformat


def calendar_oracle(d: date, w: int) -> date:
    """Step back one month at a time through the first-of-month boundary, then clamp."""
    first = d.replace(day=1)
    for _ in range(w):
        first = (first - timedelta(days=1)).replace(day=1)
    last = calendar.monthrange(first.year, first.month)[1]
    return first.replace(day=min(d.day, last))


@pytest.mark.parametrize(
    "due, paid, expected",
    [
        ("2019-01-10", "2019-01-15", PaymentLabel.ON_TIME),
        ("2019-01-10", "2019-01-16", PaymentLabel.LATE),
        ("2019-01-10", "2019-01-10", PaymentLabel.ON_TIME),
    ],
)
def test_label_examples(due, paid, expected):
    invoice = inv("A", D("2019-01-01"), D(due), D(paid))
    assert label_invoice(invoice) is expected


def test_label_of_unpaid_invoice_is_an_error():
    with pytest.raises(CensoredError):
        label_invoice(inv("A", D("2019-01-01"), D("2019-01-10")))


@pytest.mark.parametrize(
    "due, paid, as_of, expected",
    [
        ("2019-01-10", "2019-01-20", "2019-03-01", 10),
        ("2019-01-10", None, "2019-01-13", 3),
        ("2019-01-10", "2019-01-08", "2019-03-01", -2),
    ],
)
def test_days_late_examples(due, paid, as_of, expected):
    invoice = inv("A", D("2019-01-01"), D(due), D(paid) if paid else None)
    assert days_late(invoice, D(as_of)) == expected


@pytest.mark.parametrize(
    "d, w, expected",
    [("2019-03-31", 1, "2019-02-28"), ("2019-06-15", 3, "2019-03-15"), ("2020-03-30", 1, "2020-02-29")],
)
def test_subtract_months_examples(d, w, expected):
    assert subtract_months(D(d), w) == D(expected) == calendar_oracle(D(d), w)


dates = st.dates(min_value=date(1990, 1, 1), max_value=date(2100, 12, 31))


@given(dates, st.integers(1, 40))
def test_subtract_months_matches_calendar_oracle(d, w):
    assert subtract_months(d, w) == calendar_oracle(d, w)


@given(dates, st.integers(1, 24), st.integers(1, 24))
def test_subtract_months_composes_by_month(d, a, b):
    twice = subtract_months(subtract_months(d, a), b)
    once = subtract_months(d, a + b)
    assert (twice.year, twice.month) == (once.year, once.month)


@given(st.integers(-30, 60), st.integers(0, 15))
def test_label_depends_only_on_delay_and_grace(delay, grace):
    due = D("2019-05-20")
    invoice = inv("A", D("2019-05-01"), due, max(D("2019-05-01"), due + timedelta(days=delay)))
    policy = GracePolicy(grace)
    late = label_invoice(invoice, policy) is PaymentLabel.LATE
    assert late == (days_late(invoice, D("2030-01-01")) > grace)


def test_invoice_invariants():
    with pytest.raises(ValueError):
        inv("A", D("2019-01-10"), D("2019-01-09"))
    with pytest.raises(ValueError):
        inv("A", D("2019-01-10"), D("2019-01-20"), D("2019-01-09"))
    with pytest.raises(ValueError):
        Invoice("A", "C", "ES", Decimal("0"), D("2019-01-10"), D("2019-01-20"))


def test_grace_policy_validation():
    assert DEFAULT_POLICY.grace_days == 5
    with pytest.raises(ConfigError):
        GracePolicy(-1)


def test_month_helpers():
    m = parse_month("2018-12")
    assert format_month(add_months(m, 1)) == "2019-01"
    assert months_between(parse_month("2017-08"), parse_month("2018-07")) == 11
    assert month_end(parse_month("2020-02")) == D("2020-02-29")
    with pytest.raises(ValueError):
        parse_month("2018-13")
