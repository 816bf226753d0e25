"""Normalization policy: typed value canonicalization, aggregation keys, claim hashes.

The default policy is strict: it only applies lossless rewrites (NFC and
whitespace trimming on strings, shortest decimal form).  Every lossy
relaxation must be allowlisted per property and produces a MergeReason.
"""
from __future__ import annotations

import hashlib
import json
import unicodedata
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Iterable

from .canon import canon_serialize, canon_str, format_decimal
from .model import (
    EARTH,
    GREGORIAN,
    TIME_PRECISIONS,
    FactStatement,
    MergeReason,
    RelaxKind,
    TypedValue,
    ValueKind,
)

KEY_SEP = "\x1f"
NOVALUE_CONST = "\u0000NOVALUE"
SOMEVALUE_CONST = "\u0000SOMEVALUE"


class PolicyViolation(ValueError):
    pass


def _terminating(fr: Fraction) -> bool:
    d = fr.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    return d == 1


def _fraction_to_decimal(fr: Fraction) -> Decimal:
    if not _terminating(fr):
        raise PolicyViolation(f"factor {fr} has no exact decimal form")
    with localcontext() as ctx:
        ctx.prec = 200
        return Decimal(fr.numerator) / Decimal(fr.denominator)


@dataclass(frozen=True)
class UnitRule:
    canonical: str
    factor: Fraction


@dataclass
class NormalizationPolicy:
    label: str = "strict"
    datatype_defaults: dict = field(default_factory=dict)
    property_overrides: dict = field(default_factory=dict)
    relaxations: dict = field(default_factory=dict)
    unit_table: dict = field(default_factory=dict)
    coordinate_round: dict = field(default_factory=dict)
    version: str = ""

    def __post_init__(self):
        self.relaxations = {p: sorted(RelaxKind(k).value for k in ks) for p, ks in self.relaxations.items()}
        for unit, row in self.unit_table.items():
            fr = Fraction(str(row["factor"]))
            if fr <= 0 or not _terminating(fr):
                raise PolicyViolation(f"unit {unit}: factor {row['factor']} is not an exact decimal")
        computed = f"{self.label}+{self.content_hash()[:16]}"
        if self.version and self.version != computed:
            raise PolicyViolation(f"policy version {self.version!r} does not match content hash ({computed})")
        self.version = computed
        self._units = {u: UnitRule(r["canonical"], Fraction(str(r["factor"]))) for u, r in self.unit_table.items()}

    def body(self) -> dict:
        return {
            "label": self.label,
            "datatype_defaults": self.datatype_defaults,
            "property_overrides": self.property_overrides,
            "relaxations": self.relaxations,
            "unit_table": self.unit_table,
            "coordinate_round": self.coordinate_round,
        }

    def content_hash(self) -> str:
        return hashlib.sha256(canon_serialize(self.body())).hexdigest()

    def to_record(self) -> dict:
        return {**self.body(), "version": self.version}

    def allows(self, prop: str, kind: RelaxKind) -> bool:
        return kind.value in self.relaxations.get(prop, ())

    def unit_rule(self, unit: str) -> UnitRule | None:
        return self._units.get(unit)

    @classmethod
    def from_record(cls, r: dict) -> "NormalizationPolicy":
        return cls(
            label=r.get("label", "strict"),
            datatype_defaults=r.get("datatype_defaults", {}),
            property_overrides=r.get("property_overrides", {}),
            relaxations=r.get("relaxations", {}),
            unit_table=r.get("unit_table", {}),
            coordinate_round=r.get("coordinate_round", {}),
            version=r.get("version", ""),
        )

    @classmethod
    def load(cls, path: str | Path) -> "NormalizationPolicy":
        with open(path, encoding="utf-8") as fh:
            return cls.from_record(json.load(fh))


DEFAULT_POLICY = NormalizationPolicy()


# ---------------------------------------------------------------- time


def parse_wikidata_time(iso: str) -> tuple[int, int, int, int, int, int]:
    """``+1999-05-12T00:00:00Z`` -> (year, month, day, hour, minute, second)."""
    s = iso.strip()
    sign = -1 if s.startswith("-") else 1
    s = s.lstrip("+-")
    date, _, clock = s.partition("T")
    parts = date.split("-")
    if len(parts) != 3:
        raise ValueError(f"malformed time {iso!r}")
    y, mo, d = (int(p) for p in parts)
    clock = clock.rstrip("Z")
    hh = mm = ss = 0
    if clock:
        cp = clock.split(":")
        hh = int(cp[0])
        mm = int(cp[1]) if len(cp) > 1 else 0
        ss = int(cp[2]) if len(cp) > 2 else 0
    return sign * y, mo, d, hh, mm, ss


def format_time(iso: str, precision: int) -> str:
    y, mo, d, hh, mm, ss = parse_wikidata_time(iso)
    ys = f"-{abs(y):04d}" if y < 0 else f"{y:04d}"
    if precision == 9:
        return ys
    if precision == 10:
        return f"{ys}-{mo:02d}"
    if precision == 11:
        return f"{ys}-{mo:02d}-{d:02d}"
    if precision == 12:
        return f"{ys}-{mo:02d}-{d:02d}T{hh:02d}"
    if precision == 13:
        return f"{ys}-{mo:02d}-{d:02d}T{hh:02d}:{mm:02d}"
    if precision == 14:
        return f"{ys}-{mo:02d}-{d:02d}T{hh:02d}:{mm:02d}:{ss:02d}"
    raise ValueError(f"unsupported precision {precision}")


def time_string(iso: str, precision: int, calendar: str | None) -> str:
    out = f"{format_time(iso, precision)}/prec{precision}"
    if calendar and calendar != GREGORIAN:
        out += f"/{calendar}"
    return out


# ---------------------------------------------------------------- values


def _strict_value(v: TypedValue) -> str:
    k = v.kind
    if k is ValueKind.ENTITY:
        return v.entity
    if k is ValueKind.TIME:
        return time_string(v.time, v.precision, v.calendar)
    if k is ValueKind.QUANTITY:
        return f"{format_decimal(v.amount)} {v.unit or '1'}"
    if k is ValueKind.COORDINATE:
        out = f"{format_decimal(v.latitude)},{format_decimal(v.longitude)}"
        if v.globe and v.globe != EARTH:
            out += f"@{v.globe}"
        return out
    if k is ValueKind.STRING:
        return unicodedata.normalize("NFC", v.text or "").strip()
    if k is ValueKind.MONOTEXT:
        return unicodedata.normalize("NFC", v.text or "").strip() + f"@{v.language or ''}"
    if k is ValueKind.EXTERNAL_ID:
        return v.text or ""
    if k is ValueKind.NOVALUE:
        return NOVALUE_CONST
    if k is ValueKind.SOMEVALUE:
        return SOMEVALUE_CONST
    raise ValueError(f"unknown kind {k}")


def norm_value(prop: str, v: TypedValue, policy: NormalizationPolicy = DEFAULT_POLICY) -> tuple[str, list[MergeReason]]:
    """Canonical string for a typed value under ``policy`` plus any merge reasons."""
    strict = _strict_value(v)
    k = v.kind
    if k is ValueKind.TIME and policy.allows(prop, RelaxKind.TIME_PRECISION_RELAX):
        target = int(policy.property_overrides.get(prop, {}).get("time_precision", 9))
        if v.precision > target:
            out = time_string(v.time, target, v.calendar)
            if out != strict:
                return out, [MergeReason(RelaxKind.TIME_PRECISION_RELAX, f"prec{v.precision}->prec{target}")]
        return strict, []
    if k is ValueKind.QUANTITY and policy.allows(prop, RelaxKind.UNIT_CONVERT):
        unit = v.unit or "1"
        rule = policy.unit_rule(unit)
        if rule is None:
            raise PolicyViolation(f"{prop}: unit {unit} has no unit_table entry")
        if rule.canonical == unit and rule.factor == 1:
            return strict, []
        amount = _fraction_to_decimal(Fraction(v.amount) * rule.factor)
        out = f"{format_decimal(amount)} {rule.canonical}"
        if out != strict:
            return out, [MergeReason(RelaxKind.UNIT_CONVERT, f"{unit}->{rule.canonical}")]
        return strict, []
    if k is ValueKind.COORDINATE and policy.allows(prop, RelaxKind.COORD_ROUND):
        places = policy.coordinate_round.get(prop)
        if places is None:
            raise PolicyViolation(f"{prop}: COORD_ROUND allowed without coordinate_round places")
        q = Decimal(1).scaleb(-int(places))
        lat = v.latitude.quantize(q, rounding=ROUND_HALF_EVEN)
        lon = v.longitude.quantize(q, rounding=ROUND_HALF_EVEN)
        out = f"{format_decimal(lat)},{format_decimal(lon)}"
        if v.globe and v.globe != EARTH:
            out += f"@{v.globe}"
        if out != strict:
            return out, [MergeReason(RelaxKind.COORD_ROUND, f"round{places}")]
        return strict, []
    if k in (ValueKind.STRING, ValueKind.MONOTEXT) and policy.allows(prop, RelaxKind.STRING_CANON):
        text = unicodedata.normalize("NFC", v.text or "").strip().casefold()
        out = text if k is ValueKind.STRING else f"{text}@{v.language or ''}"
        if out != strict:
            return out, [MergeReason(RelaxKind.STRING_CANON, "casefold")]
        return strict, []
    return strict, []


def _norm_qual_pairs(quals: Iterable[tuple[str, TypedValue]], policy) -> tuple[list[list[str]], list[MergeReason]]:
    pairs = []
    reasons: list[MergeReason] = []
    for p, v in quals:
        nv, rs = norm_value(p, v, policy)
        pairs.append([p, nv])
        reasons.extend(rs)
    pairs.sort(key=lambda pv: (pv[0], pv[1]))
    return pairs, reasons


def norm_quals(quals: Iterable[tuple[str, TypedValue]], policy: NormalizationPolicy = DEFAULT_POLICY) -> str:
    pairs, _ = _norm_qual_pairs(quals, policy)
    return canon_str(pairs)


def aggregation_key_with_reasons(f: FactStatement, policy: NormalizationPolicy = DEFAULT_POLICY) -> tuple[str, list[MergeReason]]:
    nv, reasons = norm_value(f.property, f.value, policy)
    pairs, qreasons = _norm_qual_pairs(f.qualifiers, policy)
    key = KEY_SEP.join([f.subject, f.property, nv, canon_str(pairs)])
    return key, sorted(set(reasons + qreasons))


def aggregation_key(f: FactStatement, policy: NormalizationPolicy = DEFAULT_POLICY) -> str:
    return aggregation_key_with_reasons(f, policy)[0]


def claim_hash(key: str) -> str:
    return hashlib.sha256(key.encode("utf-8")).hexdigest()


def split_key(key: str) -> tuple[str, str, str, str]:
    # qualifier JSON escapes U+001F, so the last separator is unambiguous
    s, p, rest = key.split(KEY_SEP, 2)
    v, q = rest.rsplit(KEY_SEP, 1)
    return s, p, v, q
