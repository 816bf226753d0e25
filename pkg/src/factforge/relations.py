"""Rule-derived edges between synsets: direct joins, schema rules and conflict signals."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from pathlib import Path

from .canon import DomainTag, derive_id
from .model import Rank, ValueKind, is_qid
from .policy import format_time, parse_wikidata_time
from .synsets import FactSynset

log = logging.getLogger(__name__)

MAX_HOP = 2
Q6 = Decimal("0.000001")
START, END = "P580", "P582"
CONFLICT = "POTENTIAL_CONFLICT"


@dataclass
class RelationRule:
    rule_id: str
    relation_type: str
    source_property: str
    target_property: str
    via: list[str] = field(default_factory=list)
    tier: str = "A"
    w_tier: Decimal = Decimal(1)
    constraints: dict = field(default_factory=dict)

    @property
    def hop_depth(self) -> int:
        return len(self.via)


@dataclass
class PropertyRelationMap:
    version: str
    rows: list[RelationRule]
    functional_properties: set[str]
    temporal_properties: set[str]
    descriptive_allowlist: set[str]
    direct_join_weight: Decimal = Decimal(1)
    conflict_weight: Decimal = Decimal(1)

    @classmethod
    def from_record(cls, r: dict) -> "PropertyRelationMap":
        rows = []
        for row in r.get("rows", []):
            rows.append(RelationRule(
                rule_id=row["rule_id"],
                relation_type=row["relation_type"],
                source_property=row["source_property"],
                target_property=row["target_property"],
                via=list(row.get("via", [])),
                tier=row.get("tier", "A"),
                w_tier=Decimal(str(row.get("w_tier", 1))),
                constraints=dict(row.get("constraints", {})),
            ))
        return cls(
            version=r.get("version", ""),
            rows=rows,
            functional_properties=set(r.get("functional_properties", [])),
            temporal_properties=set(r.get("temporal_properties", [])),
            descriptive_allowlist=set(r.get("descriptive_allowlist", [])),
            direct_join_weight=Decimal(str(r.get("direct_join_weight", 1))),
            conflict_weight=Decimal(str(r.get("conflict_weight", 1))),
        )

    @classmethod
    def load(cls, path: str | Path) -> "PropertyRelationMap":
        with open(path, encoding="utf-8") as fh:
            return cls.from_record(json.load(fh))


@dataclass
class RelationEdge:
    relation_id: str
    source_synset_id: str
    target_synset_id: str
    relation_type: str
    rule_id: str
    hop_depth: int
    tier: str
    pivot_paths: list[list[str]]
    confidence: Decimal
    details: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "relation_id": self.relation_id,
            "source_synset_id": self.source_synset_id,
            "target_synset_id": self.target_synset_id,
            "relation_type": self.relation_type,
            "rule_id": self.rule_id,
            "hop_depth": self.hop_depth,
            "tier": self.tier,
            "evidence": {"pivot_paths": self.pivot_paths,
                         "counts": {"derivations": max(1, len(self.pivot_paths))}, **self.details},
            "confidence": self.confidence,
        }


def psi(x) -> Fraction:
    """Saturating map 1 - 1/(2+x): 1/2 at zero, tends to 1."""
    x = Fraction(x)
    return 1 - 1 / (2 + x)


def score_edge_confidence(w_tier, c_y, ref_count: int, n_languages: int) -> Decimal:
    if w_tier < 0 or c_y < 0 or ref_count < 0 or n_languages < 0:
        raise ValueError("inputs must be nonnegative")
    v = Fraction(str(w_tier)) * Fraction(str(c_y)) * psi(ref_count) * psi(n_languages)
    v = min(Fraction(1), v)
    d = Decimal(v.numerator) / Decimal(v.denominator)
    return d.quantize(Q6, rounding=ROUND_HALF_EVEN)


def _edge_conf(w, y: FactSynset) -> Decimal:
    return score_edge_confidence(w, y.aggregate_confidence, y.ref_count, len(y.languages))


class _Index:
    def __init__(self, synsets: list[FactSynset]):
        self.by_subject_prop: dict[tuple[str, str], list[FactSynset]] = {}
        self.by_subject: dict[str, list[FactSynset]] = {}
        for y in sorted(synsets, key=lambda s: s.synset_id):
            self.by_subject_prop.setdefault((y.subject, y.property), []).append(y)
            self.by_subject.setdefault(y.subject, []).append(y)


def _entity(y: FactSynset) -> str | None:
    if y.value.kind is ValueKind.ENTITY and is_qid(y.value.entity):
        return y.value.entity
    return None


def _edge(build_id, src, dst, rule_id, rtype, hop, tier, paths, conf, details=None) -> RelationEdge:
    rid = derive_id(DomainTag.RELATION, build_id, {"source": src, "target": dst, "rule_id": rule_id})
    return RelationEdge(rid, src, dst, rtype, rule_id, hop, tier, paths, conf, details or {})


def derive_direct_joins(synsets: list[FactSynset], rmap: PropertyRelationMap, build_id: str,
                        index: _Index | None = None) -> list[RelationEdge]:
    idx = index or _Index(synsets)
    out = []
    for y in sorted(synsets, key=lambda s: s.synset_id):
        o = _entity(y)
        if o is None:
            continue
        for z in idx.by_subject.get(o, []):
            if z.property in rmap.descriptive_allowlist:
                out.append(_edge(build_id, y.synset_id, z.synset_id, "direct_join", "DIRECT_JOIN", 0, "A", [],
                                 _edge_conf(rmap.direct_join_weight, y)))
    return out


def _row_ok(rule: RelationRule, y: FactSynset, z: FactSynset) -> bool:
    c = rule.constraints
    if c.get("exclude_deprecated", True) and (y.canonical_rank is Rank.DEPRECATED or z.canonical_rank is Rank.DEPRECATED):
        return False
    if "target_value_kind" in c and z.value.kind.value != c["target_value_kind"]:
        return False
    if c.get("target_value_is_source_subject") and _entity(z) != y.subject:
        return False
    return True


def derive_schema_edges(synsets: list[FactSynset], rmap: PropertyRelationMap, build_id: str,
                        hop_cap: int = MAX_HOP, index: _Index | None = None) -> list[RelationEdge]:
    """Typed edges y -> z following the row's pivot chain; duplicates aggregate."""
    idx = index or _Index(synsets)
    agg: dict[tuple[str, str, str], RelationEdge] = {}
    cap = min(hop_cap, MAX_HOP)
    for rule in sorted(rmap.rows, key=lambda r: r.rule_id):
        if rule.hop_depth > cap:
            continue
        for y in sorted(synsets, key=lambda s: s.synset_id):
            if y.property != rule.source_property:
                continue
            o = _entity(y)
            if o is None:
                continue
            frontier: list[tuple[str, list[str]]] = [(o, [])]
            for pid in rule.via:
                nxt = []
                for ent, path in frontier:
                    for p in idx.by_subject_prop.get((ent, pid), []):
                        e2 = _entity(p)
                        if e2 is not None and p.synset_id not in path and p.synset_id != y.synset_id:
                            nxt.append((e2, path + [p.synset_id]))
                frontier = nxt
            for ent, path in frontier:
                for z in idx.by_subject_prop.get((ent, rule.target_property), []):
                    if z.synset_id == y.synset_id or z.synset_id in path or not _row_ok(rule, y, z):
                        continue
                    conf = _edge_conf(rule.w_tier, y)
                    key = (y.synset_id, z.synset_id, rule.rule_id)
                    e = agg.get(key)
                    if e is None:
                        agg[key] = _edge(build_id, y.synset_id, z.synset_id, rule.rule_id, rule.relation_type,
                                         rule.hop_depth, rule.tier, [path] if path else [], conf)
                    else:
                        e.confidence = max(e.confidence, conf)
                        if path and path not in e.pivot_paths:
                            e.pivot_paths.append(path)
    for e in agg.values():
        e.pivot_paths.sort()
    return list(agg.values())


_NEG_INF = (-math.inf,)
_POS_INF = (math.inf,)


def _bound(y: FactSynset, pid: str, default):
    for p, v in y.qualifiers:
        if p == pid and v.kind is ValueKind.TIME:
            yy, mo, d, *_ = parse_wikidata_time(v.time)
            return (yy, mo, d)
    return default


def intervals_overlap(a: FactSynset, b: FactSynset) -> bool:
    s1, e1 = _bound(a, START, _NEG_INF), _bound(a, END, _POS_INF)
    s2, e2 = _bound(b, START, _NEG_INF), _bound(b, END, _POS_INF)
    return _lt(s1, e2) and _lt(s2, e1)


def _lt(a, b) -> bool:
    if a is _NEG_INF or b is _POS_INF:
        return True
    if a is _POS_INF or b is _NEG_INF:
        return False
    return a < b


def _granularity_mismatch(a: FactSynset, b: FactSynset) -> bool:
    va, vb = a.value, b.value
    if va.kind is not ValueKind.TIME or vb.kind is not ValueKind.TIME or va.precision == vb.precision:
        return False
    p = min(va.precision, vb.precision)
    return format_time(va.time, p) == format_time(vb.time, p)


def derive_conflicts(synsets: list[FactSynset], rmap: PropertyRelationMap, build_id: str,
                     index: _Index | None = None) -> list[RelationEdge]:
    idx = index or _Index(synsets)
    out = []
    for (subj, prop), group in sorted(idx.by_subject_prop.items()):
        functional = prop in rmap.functional_properties
        temporal = prop in rmap.temporal_properties
        if not (functional or temporal) or len(group) < 2:
            continue
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                a, b = group[i], group[j]
                if a.norm_value == b.norm_value:
                    continue
                if temporal and not functional and not intervals_overlap(a, b):
                    continue
                src, dst = (a, b) if a.synset_id < b.synset_id else (b, a)
                rule_id = "conflict.functional" if functional else "conflict.temporal"
                details = {"values": sorted([a.norm_value, b.norm_value]),
                           "granularity_mismatch": _granularity_mismatch(a, b)}
                conf = _edge_conf(rmap.conflict_weight, src)
                out.append(_edge(build_id, src.synset_id, dst.synset_id, rule_id, CONFLICT, 0, "A", [], conf,
                                 details))
    return out


def hub_downweight(edges: list[RelationEdge]) -> list[RelationEdge]:
    """Scale confidence by an inverse-log in-degree prior; ids are unchanged."""
    indeg: dict[str, int] = {}
    for e in edges:
        indeg[e.target_synset_id] = indeg.get(e.target_synset_id, 0) + 1
    for e in edges:
        factor = Decimal(repr(1.0 / math.log2(1 + indeg[e.target_synset_id])))
        e.confidence = (e.confidence * factor).quantize(Q6, rounding=ROUND_HALF_EVEN)
    return edges


def derive_all(synsets: list[FactSynset], rmap: PropertyRelationMap, build_id: str, hop_cap: int = MAX_HOP,
               tiers: set[str] | None = None, hub_prior: bool = False) -> list[RelationEdge]:
    idx = _Index(synsets)
    edges = derive_direct_joins(synsets, rmap, build_id, idx)
    edges += derive_schema_edges(synsets, rmap, build_id, hop_cap, idx)
    edges += derive_conflicts(synsets, rmap, build_id, idx)
    if tiers is not None:
        edges = [e for e in edges if e.tier in tiers or e.relation_type == CONFLICT]
    if hub_prior:
        edges = hub_downweight(edges)
    edges.sort(key=lambda e: e.relation_id)
    return edges
