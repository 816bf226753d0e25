"""Domain records shared across the pipeline."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from typing import Any

from .canon import format_decimal

QID_RE = re.compile(r"Q[0-9]+\Z")
PID_RE = re.compile(r"P[0-9]+\Z")

GREGORIAN = "Q1985727"
EARTH = "Q2"


def is_qid(s: Any) -> bool:
    return isinstance(s, str) and QID_RE.match(s) is not None


def is_pid(s: Any) -> bool:
    return isinstance(s, str) and PID_RE.match(s) is not None


def qid_sort_key(s: str):
    """Numeric order for QIDs, with non-QID literals after all entities."""
    if is_qid(s):
        return (0, int(s[1:]), s)
    return (1, 0, s)


class ValueKind(str, Enum):
    ENTITY = "ENTITY"
    TIME = "TIME"
    QUANTITY = "QUANTITY"
    COORDINATE = "COORDINATE"
    STRING = "STRING"
    MONOTEXT = "MONOTEXT"
    EXTERNAL_ID = "EXTERNAL_ID"
    NOVALUE = "NOVALUE"
    SOMEVALUE = "SOMEVALUE"


class Rank(str, Enum):
    PREFERRED = "preferred"
    NORMAL = "normal"
    DEPRECATED = "deprecated"


RANK_SCORE = {Rank.PREFERRED: 2, Rank.NORMAL: 1, Rank.DEPRECATED: 0}

# Wikidata precision codes: 9 year .. 14 second
TIME_PRECISIONS = {9: "year", 10: "month", 11: "day", 12: "hour", 13: "minute", 14: "second"}


class ViewKind(str, Enum):
    SENTENCE = "SENTENCE"
    INFOBOX_FIELD = "INFOBOX_FIELD"
    TABLE_CELL = "TABLE_CELL"


VIEW_ORDER = {ViewKind.INFOBOX_FIELD: 0, ViewKind.TABLE_CELL: 1, ViewKind.SENTENCE: 2}


class MatchType(str, Enum):
    INFOBOX_FIELD = "INFOBOX_FIELD"
    WIKILINK_ENTITY = "WIKILINK_ENTITY"
    LEXICAL_VALUE = "LEXICAL_VALUE"
    LEAD_WEAK = "LEAD_WEAK"


# structure > link > lexical > lead-weak
MATCH_PRIORITY = {
    MatchType.INFOBOX_FIELD: 3,
    MatchType.WIKILINK_ENTITY: 2,
    MatchType.LEXICAL_VALUE: 1,
    MatchType.LEAD_WEAK: 0,
}


class ReasonCode(str, Enum):
    NO_MATCH_FOUND = "NO_MATCH_FOUND"
    NO_VALID_TEXT = "NO_VALID_TEXT"
    DATATYPE_MISMATCH = "DATATYPE_MISMATCH"
    SCOPE_EXCLUDED = "SCOPE_EXCLUDED"


class RelaxKind(str, Enum):
    TIME_PRECISION_RELAX = "TIME_PRECISION_RELAX"
    UNIT_CONVERT = "UNIT_CONVERT"
    COORD_ROUND = "COORD_ROUND"
    STRING_CANON = "STRING_CANON"


@dataclass(frozen=True, order=True)
class MergeReason:
    kind: RelaxKind
    detail: str

    def to_record(self) -> dict:
        return {"kind": self.kind.value, "detail": self.detail}

    @classmethod
    def from_record(cls, r: dict) -> "MergeReason":
        return cls(RelaxKind(r["kind"]), r["detail"])


@dataclass(frozen=True)
class TypedValue:
    kind: ValueKind
    entity: str | None = None
    time: str | None = None
    precision: int | None = None
    calendar: str | None = None
    amount: Decimal | None = None
    unit: str | None = None
    latitude: Decimal | None = None
    longitude: Decimal | None = None
    coord_precision: Decimal | None = None
    globe: str | None = None
    text: str | None = None
    language: str | None = None

    def __post_init__(self):
        k = self.kind
        if k is ValueKind.ENTITY and not is_qid(self.entity):
            raise ValueError(f"bad entity id {self.entity!r}")
        if k is ValueKind.TIME and self.precision not in TIME_PRECISIONS:
            raise ValueError(f"unsupported time precision {self.precision!r}")
        for name in ("amount", "latitude", "longitude", "coord_precision"):
            v = getattr(self, name)
            if v is not None and not isinstance(v, Decimal):
                raise TypeError(f"{name} must be Decimal, got {type(v).__name__}")

    # convenience constructors
    @classmethod
    def entity_(cls, qid: str) -> "TypedValue":
        return cls(ValueKind.ENTITY, entity=qid)

    @classmethod
    def time_(cls, iso: str, precision: int, calendar: str = GREGORIAN) -> "TypedValue":
        return cls(ValueKind.TIME, time=iso, precision=precision, calendar=calendar)

    @classmethod
    def quantity_(cls, amount, unit: str = "1") -> "TypedValue":
        return cls(ValueKind.QUANTITY, amount=Decimal(str(amount)), unit=unit)

    @classmethod
    def coordinate_(cls, lat, lon, precision=None, globe: str = EARTH) -> "TypedValue":
        return cls(
            ValueKind.COORDINATE,
            latitude=Decimal(str(lat)),
            longitude=Decimal(str(lon)),
            coord_precision=None if precision is None else Decimal(str(precision)),
            globe=globe,
        )

    @classmethod
    def string_(cls, text: str) -> "TypedValue":
        return cls(ValueKind.STRING, text=text)

    @classmethod
    def monotext_(cls, text: str, language: str) -> "TypedValue":
        return cls(ValueKind.MONOTEXT, text=text, language=language)

    def to_record(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind.value}
        for name in ("entity", "time", "precision", "calendar", "unit", "globe", "text", "language"):
            v = getattr(self, name)
            if v is not None:
                out[name] = v
        for name in ("amount", "latitude", "longitude", "coord_precision"):
            v = getattr(self, name)
            if v is not None:
                out[name] = format_decimal(v)
        return out

    @classmethod
    def from_record(cls, r: dict) -> "TypedValue":
        kw: dict[str, Any] = {}
        for name in ("entity", "time", "precision", "calendar", "unit", "globe", "text", "language"):
            if name in r:
                kw[name] = r[name]
        for name in ("amount", "latitude", "longitude", "coord_precision"):
            if name in r:
                kw[name] = Decimal(str(r[name]))
        return cls(ValueKind(r["kind"]), **kw)


@dataclass
class FactStatement:
    statement_id: str
    subject: str
    property: str
    value: TypedValue
    qualifiers: list[tuple[str, TypedValue]] = field(default_factory=list)
    rank: Rank = Rank.NORMAL
    references: list[Any] = field(default_factory=list)
    last_edit: str = ""
    sitelinks: dict[str, str] = field(default_factory=dict)
    confidence: Decimal = Decimal("0.7")
    claim_hash: str = ""
    aggregation_key: str = ""
    merge_reasons: list[MergeReason] = field(default_factory=list)
    synthetic_id: bool = False

    @property
    def ref_count(self) -> int:
        return len(self.references)

    def to_record(self) -> dict:
        return {
            "statement_id": self.statement_id,
            "subject_qid": self.subject,
            "property_pid": self.property,
            "value": self.value.to_record(),
            "qualifiers": [[p, v.to_record()] for p, v in self.qualifiers],
            "rank": self.rank.value,
            "references": self.references,
            "last_edit": self.last_edit,
            "sitelinks": self.sitelinks,
            "confidence": self.confidence,
            "claim_hash": self.claim_hash,
            "synthetic_id": self.synthetic_id,
        }

    @classmethod
    def from_record(cls, r: dict) -> "FactStatement":
        return cls(
            statement_id=r["statement_id"],
            subject=r["subject_qid"],
            property=r["property_pid"],
            value=TypedValue.from_record(r["value"]),
            qualifiers=[(p, TypedValue.from_record(v)) for p, v in r.get("qualifiers", [])],
            rank=Rank(r.get("rank", "normal")),
            references=list(r.get("references", [])),
            last_edit=r.get("last_edit", ""),
            sitelinks=dict(r.get("sitelinks", {})),
            confidence=Decimal(str(r.get("confidence", "0.7"))),
            claim_hash=r.get("claim_hash", ""),
            synthetic_id=bool(r.get("synthetic_id", False)),
        )
