"""Group statements into synsets and pick canonical statements and mentions."""
from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from typing import Callable, Iterable

from .canon import DomainTag, canon_serialize, derive_id
from .grounding import FactSense
from .model import MATCH_PRIORITY, RANK_SCORE, VIEW_ORDER, FactStatement, MergeReason, Rank, TypedValue
from .policy import DEFAULT_POLICY, aggregation_key_with_reasons, claim_hash, split_key


@dataclass
class FactSynset:
    synset_id: str
    aggregation_key: str
    policy_version: str
    members: list[str]
    canonical_statement_id: str
    subject: str
    property: str
    value: TypedValue
    norm_value: str
    canonical_rank: Rank
    ref_count: int
    qualifiers: list[tuple[str, TypedValue]]
    merge_reasons: list[MergeReason] = field(default_factory=list)
    aggregate_confidence: Decimal = Decimal(0)
    canonical_mentions: dict[str, list[str]] = field(default_factory=dict)
    claim_hash: str = ""

    @property
    def languages(self) -> list[str]:
        return sorted(l for l, ids in self.canonical_mentions.items() if ids)

    def to_record(self) -> dict:
        return {
            "synset_id": self.synset_id,
            "aggregation_key": self.aggregation_key,
            "claim_hash": self.claim_hash,
            "policy_version": self.policy_version,
            "members": self.members,
            "canonical_statement_id": self.canonical_statement_id,
            "canonical_mentions": self.canonical_mentions,
            "merge_reasons": [r.to_record() for r in self.merge_reasons],
            "aggregate_confidence": self.aggregate_confidence,
            "subject": self.subject,
            "property": self.property,
            "value": self.value.to_record(),
            "norm_value": self.norm_value,
            "canonical_rank": self.canonical_rank.value,
            "ref_count": self.ref_count,
            "qualifiers": [[p, v.to_record()] for p, v in self.qualifiers],
        }

    @classmethod
    def from_record(cls, r: dict) -> "FactSynset":
        return cls(
            synset_id=r["synset_id"],
            aggregation_key=r["aggregation_key"],
            policy_version=r["policy_version"],
            members=list(r["members"]),
            canonical_statement_id=r["canonical_statement_id"],
            subject=r["subject"],
            property=r["property"],
            value=TypedValue.from_record(r["value"]),
            norm_value=r["norm_value"],
            canonical_rank=Rank(r["canonical_rank"]),
            ref_count=int(r["ref_count"]),
            qualifiers=[(p, TypedValue.from_record(v)) for p, v in r.get("qualifiers", [])],
            merge_reasons=[MergeReason.from_record(m) for m in r.get("merge_reasons", [])],
            aggregate_confidence=Decimal(str(r["aggregate_confidence"])),
            canonical_mentions={k: list(v) for k, v in r.get("canonical_mentions", {}).items()},
            claim_hash=r.get("claim_hash", ""),
        )


def select_canonical_statement(members: Iterable[FactStatement]) -> str:
    """Max of (rank, reference blocks, last edit); ties go to the smallest statement_id."""
    ordered = sorted(members, key=lambda f: f.statement_id)
    if not ordered:
        raise ValueError("empty synset")
    best = max(ordered, key=lambda f: (RANK_SCORE[f.rank], f.ref_count, f.last_edit))
    return best.statement_id


def _mention_key(s: FactSense) -> tuple:
    return (VIEW_ORDER[s.pointer.view], -MATCH_PRIORITY[s.match_type], -s.confidence, s.pointer.sort_key(),
            s.factsense_id)


def select_canonical_mention(senses: Iterable[FactSense], language: str | None = None) -> list[str]:
    """factsense ids best-first, one per distinct pointer."""
    pool = [s for s in senses if language is None or s.language == language]
    best: dict[bytes, FactSense] = {}
    for s in sorted(pool, key=_mention_key):
        k = canon_serialize(s.pointer.to_record())
        best.setdefault(k, s)
    return [s.factsense_id for s in sorted(best.values(), key=_mention_key)]


def build_synsets(statements: Iterable[FactStatement], build_id: str, policy=DEFAULT_POLICY,
                  hash_fn: Callable[[str], str] = claim_hash) -> list[FactSynset]:
    """Partition statements by aggregation key.  ``hash_fn`` only buckets; keys are compared in full."""
    buckets: dict[str, list[tuple[str, list[MergeReason], FactStatement]]] = {}
    for f in statements:
        key, reasons = aggregation_key_with_reasons(f, policy)
        buckets.setdefault(hash_fn(key), []).append((key, reasons, f))
    out = []
    for h in sorted(buckets):
        groups: dict[str, list[tuple[list[MergeReason], FactStatement]]] = {}
        for key, reasons, f in buckets[h]:
            groups.setdefault(key, []).append((reasons, f))
        for key in sorted(groups):
            rows = groups[key]
            members = [f for _, f in rows]
            reasons = sorted({r for rs, _ in rows for r in rs})
            canon_id = select_canonical_statement(members)
            canon = next(f for f in members if f.statement_id == canon_id)
            s, p, nv, _q = split_key(key)
            out.append(
                FactSynset(
                    synset_id=derive_id(DomainTag.SYNSET, build_id,
                                        {"aggregation_key": key, "policy_version": policy.version}),
                    aggregation_key=key,
                    policy_version=policy.version,
                    members=sorted(f.statement_id for f in members),
                    canonical_statement_id=canon_id,
                    subject=s,
                    property=p,
                    value=canon.value,
                    norm_value=nv,
                    canonical_rank=canon.rank,
                    ref_count=canon.ref_count,
                    qualifiers=list(canon.qualifiers),
                    merge_reasons=reasons,
                    aggregate_confidence=max(f.confidence for f in members),
                    claim_hash=claim_hash(key),
                )
            )
    out.sort(key=lambda y: y.synset_id)
    return out


def attach_mentions(synsets: list[FactSynset], senses: Iterable[FactSense], statement_to_synset: dict[str, str]):
    """Fill canonical_mentions per language and stamp each sense with its synset id."""
    by_synset: dict[str, list[FactSense]] = {}
    for s in senses:
        sid = statement_to_synset[s.statement_id]
        s.synset_id = sid
        by_synset.setdefault(sid, []).append(s)
    for y in synsets:
        pool = by_synset.get(y.synset_id, [])
        langs = sorted({s.language for s in pool})
        y.canonical_mentions = {l: select_canonical_mention(pool, l) for l in langs}
