"""Temporal train/validation/test partitioning and rolling snapshots."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from arcollect.domain import (
    ArcollectError,
    Month,
    add_months,
    format_month,
    month_index,
    month_of,
    parse_month,
)
from arcollect.features import FeatureRow


class SplitError(ArcollectError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    """Inclusive month ranges for each partition; ranges must be ordered and disjoint."""

    train_start: Month
    train_end: Month
    val_start: Month
    val_end: Month
    test_start: Month
    test_end: Month

    def __post_init__(self) -> None:
        for name, (a, b) in self.ranges().items():
            if month_index(a) > month_index(b):
                raise SplitError(f"{name} range is empty ({format_month(a)} > {format_month(b)})")
        if month_index(self.train_end) >= month_index(self.val_start):
            raise SplitError("train range must end before validation starts")
        if month_index(self.val_end) >= month_index(self.test_start):
            raise SplitError("validation range must end before test starts")

    def ranges(self) -> dict[str, tuple[Month, Month]]:
        return {
            "train": (self.train_start, self.train_end),
            "validation": (self.val_start, self.val_end),
            "test": (self.test_start, self.test_end),
        }

    def partition_of(self, month: Month) -> str | None:
        i = month_index(month)
        for name, (a, b) in self.ranges().items():
            if month_index(a) <= i <= month_index(b):
                return name
        return None

    @classmethod
    def from_strings(cls, train: Sequence[str], validation: Sequence[str], test: Sequence[str]) -> "SplitSpec":
        return cls(
            parse_month(train[0]),
            parse_month(train[1]),
            parse_month(validation[0]),
            parse_month(validation[1]),
            parse_month(test[0]),
            parse_month(test[1]),
        )

    @classmethod
    def from_dict(cls, data: dict) -> "SplitSpec":
        unknown = set(data) - {"train", "validation", "test"}
        if unknown:
            raise SplitError(f"unknown split keys: {', '.join(sorted(unknown))}")
        try:
            return cls.from_strings(data["train"], data["validation"], data["test"])
        except KeyError as exc:
            raise SplitError(f"split is missing {exc.args[0]!r}") from None

    def to_dict(self) -> dict[str, list[str]]:
        return {k: [format_month(a), format_month(b)] for k, (a, b) in self.ranges().items()}


# Train Aug 2017 - Jul 2018, validate Aug - Nov 2018, test Dec 2018 - Jun 2019.
DEFAULT_SPLIT = SplitSpec.from_strings(("2017-08", "2018-07"), ("2018-08", "2018-11"), ("2018-12", "2019-06"))


@dataclass(frozen=True)
class Partitions:
    train: list[FeatureRow]
    validation: list[FeatureRow]
    test: list[FeatureRow]

    def __iter__(self):
        return iter((self.train, self.validation, self.test))


def split(rows: Sequence[FeatureRow], spec: SplitSpec) -> Partitions:
    """Assign labeled rows to partitions by creation month; censored rows are dropped."""
    parts: dict[str, list[FeatureRow]] = {"train": [], "validation": [], "test": []}
    for row in rows:
        if not row.is_labeled:
            continue
        name = spec.partition_of(month_of(row.creation_date))
        if name is not None:
            parts[name].append(row)
    for name, members in parts.items():
        if not members:
            raise SplitError(f"{name} partition is empty")
    return Partitions(parts["train"], parts["validation"], parts["test"])


def make_snapshots(
    data_start: Month | str,
    data_end: Month | str,
    train_months: int = 6,
    val_months: int = 4,
    step_months: int = 3,
    count: int = 5,
) -> list[SplitSpec]:
    """Rolling specs: snapshot ``k`` starts ``k * step_months`` after ``data_start``.

    Training covers ``train_months``, validation the following ``val_months``
    and the test range runs to ``data_end``.
    """
    if isinstance(data_start, str):
        data_start = parse_month(data_start)
    if isinstance(data_end, str):
        data_end = parse_month(data_end)
    if min(train_months, val_months, count) < 1 or step_months < 0:
        raise SplitError("train_months, val_months and count must be >= 1; step_months >= 0")
    specs = []
    for k in range(count):
        start = add_months(data_start, k * step_months)
        train_end = add_months(start, train_months - 1)
        val_start = add_months(train_end, 1)
        val_end = add_months(val_start, val_months - 1)
        test_start = add_months(val_end, 1)
        if month_index(test_start) > month_index(data_end):
            raise SplitError(
                f"horizon {format_month(data_start)}..{format_month(data_end)} too short "
                f"for {count} snapshots (snapshot {k + 1} has no test months)"
            )
        specs.append(SplitSpec(start, train_end, val_start, val_end, test_start, data_end))
    return specs
