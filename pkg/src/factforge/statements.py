"""Project raw entity records into FactStatements."""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

from .canon import canon_serialize
from .ingest import RawEntityRecord
from .model import (
    EARTH,
    GREGORIAN,
    TIME_PRECISIONS,
    FactStatement,
    Rank,
    TypedValue,
    ValueKind,
    is_pid,
    is_qid,
)
from .policy import DEFAULT_POLICY, PolicyViolation, aggregation_key_with_reasons, claim_hash, norm_value

log = logging.getLogger(__name__)

ENTITY_PREFIX = "http://www.wikidata.org/entity/"
_BASE = {Rank.PREFERRED: Decimal("0.9"), Rank.NORMAL: Decimal("0.7"), Rank.DEPRECATED: Decimal("0.3")}
_PER_REF = Decimal("0.05")


class ClaimMalformed(ValueError):
    pass


@dataclass
class ClaimSkip:
    entity_id: str
    property: str
    statement_id: str
    reason: str

    def to_record(self) -> dict:
        return {"entity_id": self.entity_id, "property": self.property,
                "statement_id": self.statement_id, "reason": self.reason}


def statement_confidence(rank: Rank, ref_count: int) -> Decimal:
    if ref_count < 0:
        raise ValueError("ref_count must be >= 0")
    return min(Decimal(1), _BASE[Rank(rank)] + _PER_REF * min(ref_count, 2))


def _strip_entity(uri: str) -> str:
    return uri[len(ENTITY_PREFIX):] if uri.startswith(ENTITY_PREFIX) else uri


def _dec(x) -> Decimal:
    try:
        return Decimal(str(x))
    except (InvalidOperation, ValueError) as exc:
        raise ClaimMalformed(f"bad number {x!r}") from exc


def snak_value(snak: dict) -> TypedValue:
    """Typed value of a main or qualifier snak."""
    st = snak.get("snaktype")
    if st == "novalue":
        return TypedValue(ValueKind.NOVALUE)
    if st == "somevalue":
        return TypedValue(ValueKind.SOMEVALUE)
    if st != "value":
        raise ClaimMalformed(f"unknown snaktype {st!r}")
    dv = snak.get("datavalue") or {}
    typ = dv.get("type")
    val = dv.get("value")
    datatype = snak.get("datatype", "")
    try:
        if typ == "wikibase-entityid":
            eid = val.get("id") or ("Q" + str(val["numeric-id"]) if val.get("entity-type") == "item" else None)
            if not is_qid(eid):
                raise ClaimMalformed(f"unsupported entity value {eid!r}")
            return TypedValue.entity_(eid)
        if typ == "time":
            prec = int(val["precision"])
            if prec not in TIME_PRECISIONS:
                raise ClaimMalformed(f"unsupported time precision {prec}")
            cal = _strip_entity(val.get("calendarmodel", GREGORIAN))
            return TypedValue.time_(val["time"], prec, cal)
        if typ == "quantity":
            unit = _strip_entity(str(val.get("unit", "1")))
            return TypedValue(ValueKind.QUANTITY, amount=_dec(val["amount"]), unit=unit)
        if typ == "globecoordinate":
            prec = val.get("precision")
            return TypedValue(
                ValueKind.COORDINATE,
                latitude=_dec(val["latitude"]),
                longitude=_dec(val["longitude"]),
                coord_precision=None if prec is None else _dec(prec),
                globe=_strip_entity(val.get("globe", EARTH)),
            )
        if typ == "string":
            if not isinstance(val, str):
                raise ClaimMalformed("string value is not text")
            kind = ValueKind.EXTERNAL_ID if datatype == "external-id" else ValueKind.STRING
            return TypedValue(kind, text=val)
        if typ == "monolingualtext":
            return TypedValue(ValueKind.MONOTEXT, text=val["text"], language=val["language"])
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        if isinstance(exc, ClaimMalformed):
            raise
        raise ClaimMalformed(f"{typ}: {exc}") from exc
    raise ClaimMalformed(f"unsupported datavalue type {typ!r}")


def _qualifiers(claim: dict) -> list[tuple[str, TypedValue]]:
    quals = claim.get("qualifiers") or {}
    order = claim.get("qualifiers-order") or list(quals)
    out = []
    for pid in order:
        for snak in quals.get(pid, []):
            out.append((pid, snak_value(snak)))
    return out


def _synthetic_id(entity: str, prop: str, nv: str) -> str:
    return "synth$" + hashlib.sha1(canon_serialize([entity, prop, nv])).hexdigest()


def extract_statements(rec: RawEntityRecord, policy=DEFAULT_POLICY,
                       skipped: list | None = None) -> list[FactStatement]:
    """One FactStatement per well-formed claim of ``rec``; bad claims go to ``skipped``."""
    out: list[FactStatement] = []
    synth_seen: dict[str, int] = {}
    for prop in rec.claims:
        claims = rec.claims[prop]
        for claim in claims:
            sid = claim.get("id") or ""
            try:
                if not is_pid(prop):
                    raise ClaimMalformed(f"bad property id {prop!r}")
                snak = claim.get("mainsnak") or {}
                if snak.get("property", prop) != prop:
                    raise ClaimMalformed("mainsnak property differs from claim group")
                value = snak_value(snak)
                quals = _qualifiers(claim)
                rank = Rank(claim.get("rank", "normal"))
                refs = list(claim.get("references") or [])
                f = FactStatement(
                    statement_id=sid,
                    subject=rec.entity_id,
                    property=prop,
                    value=value,
                    qualifiers=quals,
                    rank=rank,
                    references=refs,
                    last_edit=rec.modified,
                    sitelinks=dict(sorted(rec.sitelinks.items())),
                    confidence=statement_confidence(rank, len(refs)),
                )
                key, reasons = aggregation_key_with_reasons(f, policy)
                if not sid:
                    base = _synthetic_id(rec.entity_id, prop, norm_value(prop, value, policy)[0])
                    k = synth_seen.get(base, 0)
                    synth_seen[base] = k + 1
                    f.statement_id = base if k == 0 else f"{base}#{k}"
                    f.synthetic_id = True
            except (ClaimMalformed, PolicyViolation, ValueError) as exc:
                reason = f"{type(exc).__name__}: {exc}"
                log.info("skip claim %s/%s: %s", rec.entity_id, prop, reason)
                if skipped is not None:
                    skipped.append(ClaimSkip(rec.entity_id, str(prop), sid, reason))
                continue
            f.aggregation_key = key
            f.claim_hash = claim_hash(key)
            f.merge_reasons = reasons
            out.append(f)
    return out
