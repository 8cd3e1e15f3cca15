"""Loan-event data model: records, time bins, cohort filters, and CSV ingestion."""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, timedelta
from enum import Enum
from pathlib import Path
from typing import Iterator

log = logging.getLogger(__name__)

GRANULARITIES = ("week", "month", "quarter")

# Monday 1970-01-05 anchors week indexing, so every week bin starts on a Monday.
_WEEK_EPOCH = date(1970, 1, 5).toordinal()


class Category(str, Enum):
    ADULT_FICTION = "adult_fiction"
    ADULT_NONFICTION = "adult_nonfiction"
    CHILDREN = "children"
    OTHER = "other"


class Medium(str, Enum):
    PHYSICAL = "physical"
    EBOOK = "ebook"
    AUDIOBOOK = "audiobook"
    OTHER = "other"


class Sex(str, Enum):
    FEMALE = "female"
    MALE = "male"
    UNKNOWN = "unknown"


class Education(str, Enum):
    BASIC = "basic"
    UPPER_SECONDARY = "upper_secondary"
    HIGHER = "higher"
    UNKNOWN = "unknown"


class Residence(str, Enum):
    LARGE_CITY = "large_city"
    TOWN_RURAL = "town_rural"
    UNKNOWN = "unknown"


_CATEGORY = {m.value: m for m in Category}
_MEDIUM = {m.value: m for m in Medium}
_SEX = {m.value: m for m in Sex}
_EDUCATION = {m.value: m for m in Education}
_RESIDENCE = {m.value: m for m in Residence}


@dataclass(frozen=True, slots=True)
class LoanEvent:
    """One consumption record, demographics snapshotted at loan time."""

    date: date
    item_key: str
    title: str
    creator: str
    category: Category
    medium: Medium
    loaner_id: str
    birthdate: date | None
    sex: Sex
    education: Education
    residence: Residence


@dataclass(frozen=True, slots=True)
class TimeBin:
    """One cell of the week/month/quarter partition of the timeline."""

    granularity: str
    index: int
    start: date
    end: date  # exclusive

    @property
    def label(self) -> str:
        return self.start.isoformat()

    def contains(self, d: date) -> bool:
        return self.start <= d < self.end


@dataclass(frozen=True)
class DateRange:
    """Inclusive calendar-day range, used for analysis windows and exclusions."""

    start: date
    end: date

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError(f"range end {self.end} before start {self.start}")

    def contains(self, d: date) -> bool:
        return self.start <= d <= self.end


def assign_bin(d: date, granularity: str) -> TimeBin:
    """Return the unique bin of the given granularity containing the date."""
    if granularity == "month":
        index = (d.year - 1970) * 12 + (d.month - 1)
        start = date(d.year, d.month, 1)
        end = date(d.year + (d.month == 12), d.month % 12 + 1, 1)
    elif granularity == "week":
        index = (d.toordinal() - _WEEK_EPOCH) // 7
        start = date.fromordinal(_WEEK_EPOCH + index * 7)
        end = start + timedelta(days=7)
    elif granularity == "quarter":
        q = (d.month - 1) // 3
        index = (d.year - 1970) * 4 + q
        start = date(d.year, 3 * q + 1, 1)
        end = date(d.year + (q == 3), (3 * q + 3) % 12 + 1, 1)
    else:
        raise ValueError(f"unknown granularity: {granularity!r}")
    return TimeBin(granularity, index, start, end)


def bin_from_index(index: int, granularity: str) -> TimeBin:
    """Reconstruct a bin from its ordinal, the inverse of assign_bin on starts."""
    if granularity == "month":
        return assign_bin(date(1970 + index // 12, index % 12 + 1, 1), granularity)
    if granularity == "week":
        return assign_bin(date.fromordinal(_WEEK_EPOCH + index * 7), granularity)
    if granularity == "quarter":
        return assign_bin(date(1970 + index // 4, (index % 4) * 3 + 1, 1), granularity)
    raise ValueError(f"unknown granularity: {granularity!r}")


def age_at(birthdate: date, on: date) -> int:
    """Whole years between birthdate and a reference date."""
    return on.year - birthdate.year - ((on.month, on.day) < (birthdate.month, birthdate.day))


@dataclass(frozen=True)
class CohortFilter:
    """Demographic and category predicate; empty fields match everything.

    Age is dynamic: it is evaluated against each event's date, so the same
    loaner can fall in different age bands on opposite sides of a birthday.
    """

    age_range: tuple[int, int | None] | None = None  # half-open [lo, hi)
    sex: Sex | None = None
    education: Education | None = None
    residence: Residence | None = None
    categories: frozenset[Category] | None = None

    def is_empty(self) -> bool:
        return (
            self.age_range is None
            and self.sex is None
            and self.education is None
            and self.residence is None
            and self.categories is None
        )

    @property
    def label(self) -> str:
        if self.is_empty():
            return "all"
        parts = []
        if self.age_range is not None:
            lo, hi = self.age_range
            parts.append(f"age{lo}-{hi if hi is not None else ''}")
        if self.sex is not None:
            parts.append(f"sex={self.sex.value}")
        if self.education is not None:
            parts.append(f"edu={self.education.value}")
        if self.residence is not None:
            parts.append(f"res={self.residence.value}")
        if self.categories is not None:
            parts.append("cat=" + "+".join(sorted(c.value for c in self.categories)))
        return ",".join(parts)


EVERYONE = CohortFilter()


def matches(event: LoanEvent, cohort: CohortFilter, tally: Counter | None = None) -> bool:
    """True iff all present filter fields match the event.

    An age filter against an event with no birthdate never matches; such
    events are counted under ``missing_birthdate`` in the optional tally.
    """
    if cohort.age_range is not None:
        if event.birthdate is None:
            if tally is not None:
                tally["missing_birthdate"] += 1
            return False
        lo, hi = cohort.age_range
        years = age_at(event.birthdate, event.date)
        if years < lo or (hi is not None and years >= hi):
            return False
    if cohort.sex is not None and event.sex is not cohort.sex:
        return False
    if cohort.education is not None and event.education is not cohort.education:
        return False
    if cohort.residence is not None and event.residence is not cohort.residence:
        return False
    if cohort.categories is not None and event.category not in cohort.categories:
        return False
    return True


# CSV ingestion ---------------------------------------------------------------

DEFAULT_SCHEMA = {
    "date": "loan_date",
    "item_key": "item_key",
    "title": "title",
    "creator": "creator",
    "category": "category",
    "medium": "medium",
    "loaner_id": "loaner_id",
    "birthdate": "birthdate",
    "sex": "sex",
    "education": "education",
    "residence": "residence",
}

MANDATORY_FIELDS = ("date", "item_key", "title", "loaner_id")


class IngestError(Exception):
    """File-level ingestion failure (unreadable input, bad schema, dirty data)."""


class SchemaError(IngestError):
    pass


@dataclass
class IngestReport:
    """Row accounting for one ingestion pass; filled while the stream is consumed."""

    path: str = ""
    rows: int = 0
    accepted: int = 0
    out_of_window: int = 0
    excluded: int = 0
    malformed: int = 0
    flagged_enum_values: int = 0
    malformed_examples: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "path": self.path,
            "rows": self.rows,
            "accepted": self.accepted,
            "out_of_window": self.out_of_window,
            "excluded": self.excluded,
            "malformed": self.malformed,
            "flagged_enum_values": self.flagged_enum_values,
            "malformed_examples": list(self.malformed_examples),
        }


_MAX_EXAMPLES = 10


def ingest(
    path: str | Path,
    schema: dict[str, str] | None = None,
    window: DateRange | None = None,
    exclude: tuple[DateRange, ...] | list[DateRange] = (),
    max_malformed_fraction: float = 0.01,
) -> tuple[Iterator[LoanEvent], IngestReport]:
    """Stream loan events from a delimited file.

    Returns the event iterator and a report that fills in as the stream is
    consumed. Events outside the window or inside an exclusion range are
    skipped and counted. If, once the file is exhausted, more than
    ``max_malformed_fraction`` of rows were malformed, the iterator raises
    IngestError. The header is validated eagerly; mandatory columns are
    date, item_key, title, and loaner_id.
    """
    schema = dict(DEFAULT_SCHEMA if schema is None else schema)
    for fld in MANDATORY_FIELDS:
        if fld not in schema:
            raise SchemaError(f"schema does not map mandatory field {fld!r}")

    try:
        handle = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc

    reader = csv.reader(handle)
    try:
        header = next(reader)
    except StopIteration:
        handle.close()
        raise SchemaError(f"{path}: empty file, no header row")

    positions = {name: i for i, name in enumerate(header)}
    columns: dict[str, int | None] = {}
    for fld, col in schema.items():
        if col in positions:
            columns[fld] = positions[col]
        elif fld in MANDATORY_FIELDS:
            handle.close()
            raise SchemaError(f"{path}: missing mandatory column {col!r}")
        else:
            columns[fld] = None

    report = IngestReport(path=str(path))
    events = _event_stream(
        handle, reader, columns, window, tuple(exclude), max_malformed_fraction, report
    )
    return events, report


def _event_stream(handle, reader, columns, window, exclude, max_bad, report):
    i_date = columns["date"]
    i_key = columns["item_key"]
    i_title = columns["title"]
    i_loaner = columns["loaner_id"]
    i_creator = columns.get("creator")
    i_cat = columns.get("category")
    i_med = columns.get("medium")
    i_birth = columns.get("birthdate")
    i_sex = columns.get("sex")
    i_edu = columns.get("education")
    i_res = columns.get("residence")

    date_cache: dict[str, date | None] = {}
    from_iso = date.fromisoformat

    def parse_date(text):
        d = date_cache.get(text)
        if d is None and text not in date_cache:
            try:
                d = from_iso(text)
            except ValueError:
                d = None
            date_cache[text] = d
        return d

    def flag_example(row_no, reason):
        if len(report.malformed_examples) < _MAX_EXAMPLES:
            report.malformed_examples.append(f"row {row_no}: {reason}")

    ncols_min = max(i for i in columns.values() if i is not None) + 1

    try:
        for row in reader:
            report.rows += 1
            if len(row) < ncols_min:
                report.malformed += 1
                flag_example(report.rows, "short row")
                continue
            d = parse_date(row[i_date])
            if d is None:
                report.malformed += 1
                flag_example(report.rows, f"bad date {row[i_date]!r}")
                continue
            key = row[i_key]
            title = row[i_title]
            loaner = row[i_loaner]
            if not key or not title or not loaner:
                report.malformed += 1
                flag_example(report.rows, "empty mandatory field")
                continue

            birth = None
            if i_birth is not None:
                raw = row[i_birth]
                if raw:
                    birth = parse_date(raw)
                    if birth is None:
                        report.malformed += 1
                        flag_example(report.rows, f"bad birthdate {raw!r}")
                        continue
                    if birth > d:
                        report.malformed += 1
                        flag_example(report.rows, "birthdate after loan date")
                        continue

            if window is not None and not (window.start <= d <= window.end):
                report.out_of_window += 1
                continue
            skip = False
            for rng in exclude:
                if rng.start <= d <= rng.end:
                    report.excluded += 1
                    skip = True
                    break
            if skip:
                continue

            flagged = 0
            raw = row[i_cat] if i_cat is not None else ""
            category = _CATEGORY.get(raw)
            if category is None:
                category = Category.OTHER
                flagged += bool(raw)
            raw = row[i_med] if i_med is not None else ""
            medium = _MEDIUM.get(raw)
            if medium is None:
                medium = Medium.OTHER
                flagged += bool(raw)
            raw = row[i_sex] if i_sex is not None else ""
            sex = _SEX.get(raw)
            if sex is None:
                sex = Sex.UNKNOWN
                flagged += bool(raw)
            raw = row[i_edu] if i_edu is not None else ""
            education = _EDUCATION.get(raw)
            if education is None:
                education = Education.UNKNOWN
                flagged += bool(raw)
            raw = row[i_res] if i_res is not None else ""
            residence = _RESIDENCE.get(raw)
            if residence is None:
                residence = Residence.UNKNOWN
                flagged += bool(raw)
            report.flagged_enum_values += flagged

            report.accepted += 1
            yield LoanEvent(
                d,
                key,
                title,
                row[i_creator] if i_creator is not None else "",
                category,
                medium,
                loaner,
                birth,
                sex,
                education,
                residence,
            )
    finally:
        handle.close()

    if report.rows and report.malformed > max_bad * report.rows:
        raise IngestError(
            f"{report.path}: {report.malformed} of {report.rows} rows malformed "
            f"(threshold {max_bad:.1%}); first offenders: {report.malformed_examples}"
        )
