import random
from datetime import date

import pytest

from arcollect.domain import format_month, month_of
from arcollect.features import extract_all
from arcollect.ingest import InvoiceDataset
from arcollect.split import DEFAULT_SPLIT, SplitError, SplitSpec, make_snapshots, split
from helpers import random_invoices


@pytest.fixture(scope="module")
def rows():
    invoices = random_invoices(random.Random(4), 1500, span_days=700, unpaid_prob=0.1, base=date(2017, 8, 1))
    return extract_all(InvoiceDataset(invoices), 3)


def months(part):
    return sorted({format_month(month_of(r.creation_date)) for r in part})


def test_table3_boundaries(rows):
    parts = split(rows, DEFAULT_SPLIT)
    assert months(parts.train)[-1] == "2018-07"
    assert months(parts.validation)[0] == "2018-08"
    assert months(parts.validation)[-1] == "2018-11"
    assert months(parts.test)[0] == "2018-12"


def test_partitions_are_ordered_disjoint_and_labeled(rows):
    parts = split(rows, DEFAULT_SPLIT)
    assert max(r.creation_date for r in parts.train) < min(r.creation_date for r in parts.validation)
    assert max(r.creation_date for r in parts.validation) < min(r.creation_date for r in parts.test)
    ids = [r.invoice_id for part in parts for r in part]
    assert len(ids) == len(set(ids))
    assert all(r.is_labeled for part in parts for r in part)
    assert split(rows, DEFAULT_SPLIT) == parts


def test_overlapping_ranges_rejected():
    with pytest.raises(SplitError):
        SplitSpec.from_strings(("2018-01", "2018-06"), ("2018-06", "2018-08"), ("2018-09", "2018-12"))
    with pytest.raises(SplitError):
        SplitSpec.from_strings(("2018-03", "2018-01"), ("2018-04", "2018-05"), ("2018-06", "2018-07"))


def test_singleton_partitions(rows):
    spec = SplitSpec.from_strings(("2018-01", "2018-01"), ("2018-02", "2018-02"), ("2018-03", "2018-03"))
    picked = [next(r for r in rows if r.is_labeled and format_month(month_of(r.creation_date)) == m) for m in ("2018-01", "2018-02", "2018-03")]
    parts = split(picked, spec)
    assert [len(p) for p in parts] == [1, 1, 1]


def test_empty_partition_is_an_error(rows):
    spec = SplitSpec.from_strings(("2017-08", "2018-07"), ("2018-08", "2018-11"), ("2025-01", "2025-02"))
    with pytest.raises(SplitError, match="test"):
        split(rows, spec)


def test_snapshot_layout():
    specs = make_snapshots("2017-06", "2019-06")
    assert len(specs) == 5
    assert specs[0].to_dict() == {
        "train": ["2017-06", "2017-11"],
        "validation": ["2017-12", "2018-03"],
        "test": ["2018-04", "2019-06"],
    }
    assert specs[4].to_dict()["train"] == ["2018-06", "2018-11"]
    assert all(s.to_dict()["test"][1] == "2019-06" for s in specs)


def test_single_snapshot_equals_direct_construction():
    (only,) = make_snapshots("2017-06", "2019-06", count=1)
    assert only == SplitSpec.from_strings(("2017-06", "2017-11"), ("2017-12", "2018-03"), ("2018-04", "2019-06"))


def test_snapshots_need_enough_horizon():
    with pytest.raises(SplitError):
        make_snapshots("2017-06", "2018-06", step_months=12, count=2)


def test_spec_dict_round_trip():
    assert SplitSpec.from_dict(DEFAULT_SPLIT.to_dict()) == DEFAULT_SPLIT
    with pytest.raises(SplitError):
        SplitSpec.from_dict({"train": ["2018-01", "2018-02"], "validation": ["2018-03", "2018-03"]})
    with pytest.raises(SplitError):
        SplitSpec.from_dict({**DEFAULT_SPLIT.to_dict(), "holdout": ["2019-07", "2019-08"]})
