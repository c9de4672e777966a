"""Review records, rating schemas, CSV ingestion and dataset statistics.

The four review categories each carry a fixed list of 1..5 star rating
features plus a 1..10 overall rating and a binary "would you recommend"
label. Missing values are kept as ``None``; nothing is imputed.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
from dataclasses import dataclass, field, replace
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Mapping, Sequence

logger = logging.getLogger(__name__)

RATING_MIN, RATING_MAX = 1, 5
OVERALL_MIN, OVERALL_MAX = 1, 10


class Category(str, enum.Enum):
    AIRPORT = "airport"
    LOUNGE = "lounge"
    AIRLINE = "airline"
    SEAT = "seat"

    @classmethod
    def parse(cls, value: "str | Category") -> "Category":
        if isinstance(value, Category):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown category {value!r}; expected one of {[c.value for c in cls]}"
            ) from None


@dataclass(frozen=True)
class RatingSchema:
    category: Category
    features: tuple[str, ...]
    rating_domain: tuple[int, int] = (RATING_MIN, RATING_MAX)
    overall_domain: tuple[int, int] = (OVERALL_MIN, OVERALL_MAX)

    def __post_init__(self):
        if len(set(self.features)) != len(self.features):
            raise ValueError(f"duplicate feature names in {self.category.value} schema")


SCHEMAS: dict[Category, RatingSchema] = {
    Category.AIRPORT: RatingSchema(Category.AIRPORT, (
        "queuing", "airport_shopping", "terminal_cleanliness", "terminal_seating",
        "food_beverages", "wifi_connectivity", "terminal_signs", "airport_staff",
    )),
    Category.LOUNGE: RatingSchema(Category.LOUNGE, (
        "comfort", "staff_service", "bar_beverages", "catering",
        "cleanliness", "washrooms", "wifi",
    )),
    Category.AIRLINE: RatingSchema(Category.AIRLINE, (
        "value_money", "cabin_staff", "seat_comfort", "food_beverages",
        "inflight_entertainment", "ground_service", "wifi_connectivity",
    )),
    Category.SEAT: RatingSchema(Category.SEAT, (
        "seat_legroom", "seat_width", "aisle_space", "seat_recline",
        "viewing_tv", "seat_storage", "power_supply",
    )),
}


def schema_for(category: "Category | str") -> RatingSchema:
    return SCHEMAS[Category.parse(category)]


@dataclass(frozen=True)
class ReviewRecord:
    category: Category
    timestamp: date | None
    entity: str
    text: str
    ratings: Mapping[str, int | None] = field(default_factory=dict)
    overall: int | None = None
    recommended: bool | None = None
    author: str | None = None
    sentiment: float | None = None
    line_no: int | None = None

    def __post_init__(self):
        if self.sentiment is not None and not -1.0 <= self.sentiment <= 1.0:
            raise ValueError(f"sentiment {self.sentiment} outside [-1, 1]")

    def value(self, name: str):
        """Feature lookup by name, covering ``overall`` and ``sentiment``."""
        if name == "overall":
            return self.overall
        if name == "sentiment":
            return self.sentiment
        return self.ratings.get(name)


@dataclass(frozen=True)
class Rejection:
    line_no: int
    reason: str

    def to_json(self) -> str:
        return json.dumps({"line_no": self.line_no, "reason": self.reason})


@dataclass(frozen=True)
class IngestWarning:
    line_no: int
    column: str
    value: str
    reason: str


@dataclass(frozen=True)
class Dataset:
    category: Category
    records: tuple[ReviewRecord, ...]
    rejections: tuple[Rejection, ...] = ()
    warnings: tuple[IngestWarning, ...] = ()
    # positions (in ``records``) of records without a timestamp, set by sort_chronological
    undated: tuple[int, ...] = ()

    def __post_init__(self):
        for rec in self.records:
            if rec.category is not self.category:
                raise ValueError(
                    f"record of category {rec.category.value} in {self.category.value} dataset"
                )

    @property
    def schema(self) -> RatingSchema:
        return SCHEMAS[self.category]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def with_records(self, records: Iterable[ReviewRecord]) -> "Dataset":
        return replace(self, records=tuple(records), undated=())

    def labeled(self) -> "Dataset":
        return self.with_records(r for r in self.records if r.recommended is not None)


@dataclass(frozen=True)
class DatasetStats:
    category: Category
    n_users: int
    n_reviews: int
    satisfaction_rate: float | None
    n_labeled: int = 0
    n_duplicates: int = 0

    def describe(self) -> str:
        rate = "n/a" if self.satisfaction_rate is None else f"{self.satisfaction_rate:.2%}"
        return (
            f"category: {self.category.value}\n"
            f"users: {self.n_users}\n"
            f"reviews: {self.n_reviews}\n"
            f"labeled: {self.n_labeled}\n"
            f"satisfaction: {rate}\n"
            f"duplicate author/entity rows: {self.n_duplicates}"
        )


class IngestError(Exception):
    """Raised when a review file cannot be ingested at all."""


# Scrape headers -> canonical column names. Schema features also match
# their own name and ``<name>_rating``.
COLUMN_ALIASES: dict[str, tuple[str, ...]] = {
    "timestamp": ("date", "timestamp", "review_date"),
    "entity": ("entity", "airport_name", "lounge_name", "airline_name", "name"),
    "text": ("text", "content", "review", "review_text"),
    "author": ("author", "user", "author_id"),
    "overall": ("overall", "overall_rating"),
    "recommended": ("recommended", "recommend"),
    "sentiment": ("sentiment",),
}
FEATURE_ALIASES: dict[Category, dict[str, tuple[str, ...]]] = {
    Category.LOUNGE: {"wifi": ("wifi_connectivity_rating", "wifi_connectivity")},
    Category.SEAT: {"viewing_tv": ("viewing_tv_rating", "viewingtv_rating")},
}
MANDATORY = ("timestamp", "entity", "text")

DATE_FORMATS = ("%Y-%m-%d", "%d/%m/%Y", "%d-%m-%Y", "%d %B %Y", "%d %b %Y", "%B %d, %Y")

_TRUE = {"1", "yes", "true", "y"}
_FALSE = {"0", "no", "false", "n"}


def parse_date(raw: str) -> date | None:
    raw = raw.strip()
    if not raw:
        return None
    # tolerate a trailing time-of-day; only the date is kept
    head = raw[:10]
    try:
        return date.fromisoformat(head)
    except ValueError:
        pass
    for fmt in DATE_FORMATS:
        try:
            return datetime.strptime(raw, fmt).date()
        except ValueError:
            continue
    raise ValueError(f"unrecognised date {raw!r}")


def _parse_int(raw: str) -> int:
    value = float(raw)
    if not value.is_integer():
        raise ValueError(f"non-integer value {raw!r}")
    return int(value)


def _resolve_columns(header: Sequence[str], category: Category) -> dict[str, str]:
    """Map canonical column/feature names to the header names present."""
    normalized = {h.strip().lower(): h for h in header if h is not None}
    resolved: dict[str, str] = {}
    for canon, aliases in COLUMN_ALIASES.items():
        for alias in aliases:
            if alias in normalized:
                resolved[canon] = normalized[alias]
                break
    extra = FEATURE_ALIASES.get(category, {})
    for feat in SCHEMAS[category].features:
        for alias in (feat, f"{feat}_rating", *extra.get(feat, ())):
            if alias in normalized:
                resolved[feat] = normalized[alias]
                break
    return resolved


def ingest(path: "str | Path", category: "Category | str") -> Dataset:
    """Read one category's review CSV.

    Rows that cannot be turned into a record (wrong field count, bad date)
    end up in ``Dataset.rejections``. Out-of-domain or unparsable ratings
    are kept as absent and reported in ``Dataset.warnings``.
    """
    category = Category.parse(category)
    schema = SCHEMAS[category]
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"no such file: {path}")

    records: list[ReviewRecord] = []
    rejections: list[Rejection] = []
    warnings: list[IngestWarning] = []
    try:
        with path.open(encoding="utf-8-sig", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise IngestError(f"{path}: empty file, no header row") from None
            columns = _resolve_columns(header, category)
            missing = [m for m in MANDATORY if m not in columns]
            if missing:
                raise IngestError(f"{path}: header lacks mandatory columns {missing}")
            index = {name: header.index(col) for name, col in columns.items()}

            prev_line = reader.line_num
            for row in reader:
                line_no = prev_line + 1
                prev_line = reader.line_num
                if not row:
                    continue
                if len(row) != len(header):
                    rejections.append(Rejection(
                        line_no, f"expected {len(header)} fields, got {len(row)}"))
                    continue
                try:
                    rec = _build_record(row, index, schema, line_no, warnings)
                except ValueError as exc:
                    rejections.append(Rejection(line_no, str(exc)))
                    continue
                records.append(rec)
    except UnicodeDecodeError as exc:
        raise IngestError(f"{path}: not valid UTF-8 ({exc.reason} at byte {exc.start})") from exc
    except csv.Error as exc:
        raise IngestError(f"{path}: malformed CSV: {exc}") from exc

    for w in warnings:
        logger.warning("%s line %d: %s=%r %s", path.name, w.line_no, w.column, w.value, w.reason)
    for r in rejections:
        logger.warning("%s line %d rejected: %s", path.name, r.line_no, r.reason)
    return Dataset(category, tuple(records), tuple(rejections), tuple(warnings))


def _build_record(row, index, schema, line_no, warnings) -> ReviewRecord:
    def cell(name):
        i = index.get(name)
        return "" if i is None else row[i]

    def bounded(name, lo, hi):
        raw = cell(name).strip()
        if not raw:
            return None
        try:
            value = _parse_int(raw)
        except ValueError:
            warnings.append(IngestWarning(line_no, name, raw, "not an integer; treated as absent"))
            return None
        if not lo <= value <= hi:
            warnings.append(IngestWarning(line_no, name, raw, f"outside {lo}..{hi}; treated as absent"))
            return None
        return value

    timestamp = parse_date(cell("timestamp"))  # ValueError -> rejection
    ratings = {f: bounded(f, *schema.rating_domain) for f in schema.features}
    overall = bounded("overall", *schema.overall_domain)

    raw_rec = cell("recommended").strip().lower()
    recommended = None
    if raw_rec in _TRUE:
        recommended = True
    elif raw_rec in _FALSE:
        recommended = False
    elif raw_rec:
        warnings.append(IngestWarning(line_no, "recommended", raw_rec, "not a yes/no flag; treated as absent"))

    sentiment = None
    raw_sent = cell("sentiment").strip()
    if raw_sent:
        try:
            sentiment = float(raw_sent)
        except ValueError:
            sentiment = None
        if sentiment is None or not -1.0 <= sentiment <= 1.0 or math.isnan(sentiment):
            warnings.append(IngestWarning(line_no, "sentiment", raw_sent, "outside [-1, 1]; treated as absent"))
            sentiment = None

    author = cell("author").strip() or None
    return ReviewRecord(
        category=schema.category,
        timestamp=timestamp,
        entity=cell("entity"),
        text=cell("text"),
        ratings=ratings,
        overall=overall,
        recommended=recommended,
        author=author,
        sentiment=sentiment,
        line_no=line_no,
    )


def canonical_header(category: "Category | str") -> list[str]:
    schema = schema_for(category)
    return ["date", "entity", "author", "overall", *schema.features, "recommended", "sentiment", "text"]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, date):
        return value.isoformat()
    return str(value)


def export_csv(d: Dataset, path: "str | Path") -> None:
    """Write ``d`` in the canonical column layout that :func:`ingest` reads back."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(canonical_header(d.category))
        for r in d.records:
            writer.writerow([
                _fmt(r.timestamp), r.entity, _fmt(r.author), _fmt(r.overall),
                *(_fmt(r.ratings.get(f)) for f in d.schema.features),
                _fmt(r.recommended), _fmt(r.sentiment), r.text,
            ])


def write_rejections(d: Dataset, path: "str | Path") -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rej in d.rejections:
            fh.write(rej.to_json() + "\n")


def stats(d: Dataset) -> DatasetStats:
    authors = {r.author for r in d.records if r.author is not None}
    labels = [r.recommended for r in d.records if r.recommended is not None]
    rate = sum(labels) / len(labels) if labels else None
    seen: set[tuple[str, str]] = set()
    dupes = 0
    for r in d.records:
        if r.author is None:
            continue
        key = (r.author, r.entity)
        if key in seen:
            dupes += 1
        seen.add(key)
    return DatasetStats(d.category, len(authors), len(d.records), rate, len(labels), dupes)


def sort_chronological(d: Dataset) -> Dataset:
    """Stable sort by date; undated records go first, in input order.

    The returned dataset lists the positions of undated records in
    ``undated`` so callers can report them.
    """
    undated = [r for r in d.records if r.timestamp is None]
    dated = sorted((r for r in d.records if r.timestamp is not None), key=lambda r: r.timestamp)
    if undated:
        logger.warning("%s: %d records without a date placed first", d.category.value, len(undated))
    return replace(d, records=tuple(undated + dated), undated=tuple(range(len(undated))))


# Normalized line-delimited JSON cache shared between CLI stages.

def _record_to_dict(r: ReviewRecord) -> dict:
    return {
        "line_no": r.line_no,
        "date": _fmt(r.timestamp) or None,
        "entity": r.entity,
        "author": r.author,
        "overall": r.overall,
        "ratings": {k: r.ratings.get(k) for k in SCHEMAS[r.category].features},
        "recommended": r.recommended,
        "sentiment": r.sentiment,
        "text": r.text,
    }


def write_jsonl(d: Dataset, path: "str | Path", header: Mapping | None = None) -> None:
    head = {"kind": "dataset", "category": d.category.value,
            "features": list(d.schema.features), **(header or {})}
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(head, sort_keys=True) + "\n")
        for r in d.records:
            fh.write(json.dumps(_record_to_dict(r), ensure_ascii=False) + "\n")


def read_jsonl(path: "str | Path") -> tuple[Dataset, dict]:
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"no dataset cache at {path}")
    with path.open(encoding="utf-8") as fh:
        try:
            head = json.loads(fh.readline())
            category = Category.parse(head["category"])
            records = []
            for line in fh:
                obj = json.loads(line)
                records.append(ReviewRecord(
                    category=category,
                    timestamp=date.fromisoformat(obj["date"]) if obj["date"] else None,
                    entity=obj["entity"],
                    text=obj["text"],
                    ratings=dict(obj["ratings"]),
                    overall=obj["overall"],
                    recommended=obj["recommended"],
                    author=obj["author"],
                    sentiment=obj["sentiment"],
                    line_no=obj["line_no"],
                ))
        except (KeyError, ValueError, TypeError) as exc:
            raise IngestError(f"{path}: corrupt dataset cache: {exc}") from exc
    return Dataset(category, tuple(records)), head
