"""Closed-context fact-checking claims and their metrics."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from ..canon import canon_serialize
from ..literals import parse_dates, parse_quantities
from ..model import Rank, ValueKind
from ..policy import format_time
from .realize import realize_claim, render_value
from .splits import Split

SUPPORTED, REFUTED, NEI = "Supported", "Refuted", "NEI"
LABELS = (SUPPORTED, REFUTED, NEI)
DEFAULT_RATIO = (Fraction(34, 100), Fraction(33, 100), Fraction(33, 100))
UNIT_FIELDS = ("language", "page_id", "revision_id", "view", "locator")


class GenerationStarved(RuntimeError):
    def __init__(self, language: str, label: str, needed: int, available: int):
        super().__init__(f"{language}/{label}: need {needed}, pool has {available}")
        self.language = language
        self.label = label
        self.needed = needed
        self.available = available


@dataclass
class MfcClaim:
    claim_id: str
    language: str
    text: str
    label: str
    source_synset_id: str
    split: str
    gold_evidence: list[dict] = field(default_factory=list)
    value: str = ""

    def to_record(self) -> dict:
        return {"claim_id": self.claim_id, "language": self.language, "text": self.text, "label": self.label,
                "source_synset_id": self.source_synset_id, "split": self.split,
                "gold_evidence": self.gold_evidence, "value": self.value}


def largest_remainder(n: int, ratio=DEFAULT_RATIO) -> list[int]:
    """Integer counts summing to ``n`` in proportion to ``ratio`` (ties to earlier strata)."""
    ratio = [Fraction(r) for r in ratio]
    total = sum(ratio)
    exact = [n * r / total for r in ratio]
    counts = [int(e) for e in exact]
    order = sorted(range(len(ratio)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def unit_key(pointer: dict) -> tuple:
    return tuple(canon_serialize(pointer[k]) for k in UNIT_FIELDS)


# ------------------------------------------------------------ exact-value retrieval


class ExactValueIndex:
    """Datatype-aware exact lookup over a page's normalized unit strings."""

    def __init__(self, pack, units_by_page: dict[int, list[str]]):
        self.pack = pack
        self.units = units_by_page

    def hits(self, page_id: int, value, surface: str | None) -> int:
        n = 0
        for text in self.units.get(page_id, []):
            if surface and surface in text:
                n += 1
                continue
            if value.kind is ValueKind.TIME:
                for lit in parse_dates(text, self.pack):
                    p = min(lit.value.precision, value.precision)
                    if format_time(lit.value.time, p) == format_time(value.time, p):
                        n += 1
                        break
            elif value.kind is ValueKind.QUANTITY:
                if any(lit.value.amount == value.amount for lit in parse_quantities(text, self.pack)):
                    n += 1
        return n


# ------------------------------------------------------------ generation


def _order(build_id: str, lang: str, tag: str, key: str) -> str:
    return hashlib.sha1(f"{build_id}\x1f{lang}\x1f{tag}\x1f{key}".encode("utf-8")).hexdigest()


def _claim_id(lang: str, label: str, source: str, value: str) -> str:
    return "mfc$" + hashlib.sha1(canon_serialize([lang, label, source, value])).hexdigest()[:24]


@dataclass
class MfcInputs:
    synsets: list  # FactSynset
    senses: dict  # factsense_id -> FactSense
    labels: dict[str, dict[str, str]]  # QID -> {lang: label}
    splits: dict[str, Split]
    conflicts: list  # RelationEdge with POTENTIAL_CONFLICT
    functional: set[str] = field(default_factory=set)
    packs: dict = field(default_factory=dict)
    indexes: dict = field(default_factory=dict)  # lang -> ExactValueIndex


def _evidence(y, lang: str, senses: dict) -> list[dict]:
    ids = y.canonical_mentions.get(lang) or []
    if not ids:
        return []
    s = senses[ids[0]]
    p = s.pointer
    return [{"pointer": p.to_record(), "spans": [[p.start, p.end]], "unit_text": s.unit_text}]


def _subject_name(y, lang: str, inp: MfcInputs) -> str | None:
    ids = y.canonical_mentions.get(lang) or []
    if ids and inp.senses[ids[0]].page_title:
        return inp.senses[ids[0]].page_title
    return inp.labels.get(y.subject, {}).get(lang)


def _usable(y) -> bool:
    return y.canonical_rank is not Rank.DEPRECATED and y.value.kind not in (ValueKind.NOVALUE, ValueKind.SOMEVALUE)


def build_pools(inp: MfcInputs, lang: str, build_id: str) -> dict[str, list[MfcClaim]]:
    pack = inp.packs.get(lang)
    grounded = sorted((y for y in inp.synsets if _usable(y) and y.canonical_mentions.get(lang)),
                      key=lambda y: _order(build_id, lang, "y", y.synset_id))
    by_sp: dict[tuple[str, str], list] = {}
    by_prop: dict[str, list] = {}
    for y in sorted(inp.synsets, key=lambda y: y.synset_id):
        if _usable(y):
            by_sp.setdefault((y.subject, y.property), []).append(y)
            by_prop.setdefault(y.property, []).append(y)
    partner: dict[str, list[str]] = {}
    for e in inp.conflicts:
        partner.setdefault(e.source_synset_id, []).append(e.target_synset_id)
        partner.setdefault(e.target_synset_id, []).append(e.source_synset_id)
    syn = {y.synset_id: y for y in inp.synsets}
    pools: dict[str, list[MfcClaim]] = {SUPPORTED: [], REFUTED: [], NEI: []}

    def verbal(y, v):
        name = _subject_name(y, lang, inp)
        if not name:
            return None
        return realize_claim(name, y.property, v, lang, inp.labels, pack)

    def supported_value(y, nv: str) -> bool:
        return any(z.norm_value == nv for z in by_sp.get((y.subject, y.property), []))

    for y in grounded:
        split = inp.splits[y.synset_id].value
        ev = _evidence(y, lang, inp.senses)
        text = verbal(y, y.value)
        if text and ev:
            pools[SUPPORTED].append(MfcClaim(_claim_id(lang, SUPPORTED, y.synset_id, y.norm_value), lang, text,
                                             SUPPORTED, y.synset_id, split, ev, y.norm_value))
        # refuted: conflict partner first, else a same-property value not supported for this subject
        alt = None
        for pid in sorted(partner.get(y.synset_id, [])):
            z = syn[pid]
            if z.value.kind is y.value.kind and z.norm_value != y.norm_value:
                alt = z
                break
        if alt is None:
            donors = sorted((z for z in by_prop.get(y.property, []) if z.subject != y.subject
                             and z.value.kind is y.value.kind and not supported_value(y, z.norm_value)),
                            key=lambda z: _order(build_id, lang, "r" + y.synset_id, z.synset_id))
            alt = donors[0] if donors else None
        if alt is not None and ev:
            text = verbal(y, alt.value)
            if text:
                pools[REFUTED].append(MfcClaim(_claim_id(lang, REFUTED, y.synset_id, alt.norm_value), lang, text,
                                               REFUTED, y.synset_id, split, ev, alt.norm_value))
    pools[NEI] = _nei_pool(inp, lang, build_id, grounded, by_sp, by_prop, verbal)
    return pools


def _nei_pool(inp, lang, build_id, grounded, by_sp, by_prop, verbal) -> list[MfcClaim]:
    """(subject, property) pairs with an injected value nothing in the snapshot supports or contradicts."""
    out = []
    index: ExactValueIndex | None = inp.indexes.get(lang)
    seen = set()
    page_of = {}
    for y in grounded:
        ids = y.canonical_mentions.get(lang) or []
        page_of.setdefault(y.subject, inp.senses[ids[0]].pointer.page_id)
    props = sorted(by_prop)
    for y in grounded:
        if y.subject in seen:
            continue
        seen.add(y.subject)
        for pid in sorted(props, key=lambda p: _order(build_id, lang, "p" + y.subject, p)):
            if by_sp.get((y.subject, pid)):
                continue  # any second value could be contradicted by the existing one
            donors = sorted((z for z in by_prop[pid] if z.subject != y.subject),
                            key=lambda z: _order(build_id, lang, "n" + y.subject, z.synset_id))
            for z in donors:
                surface = render_value(z.value, lang, inp.labels, inp.packs.get(lang))
                if surface is None:
                    continue
                if index is not None and index.hits(page_of[y.subject], z.value, surface):
                    continue
                probe = _Probe(y.subject, pid, y.canonical_mentions)
                text = verbal(probe, z.value)
                if not text:
                    continue
                out.append(MfcClaim(_claim_id(lang, NEI, f"{y.subject}|{pid}", z.norm_value), lang, text, NEI,
                                    z.synset_id, inp.splits[z.synset_id].value, [], z.norm_value))
                break
    return out


@dataclass
class _Probe:
    subject: str
    property: str
    canonical_mentions: dict


def generate_mfc_claims(inp: MfcInputs, lang: str, build_id: str, n: int | None = None,
                        ratio=DEFAULT_RATIO) -> list[MfcClaim]:
    """Balanced claim set for ``lang``; ``n=None`` picks the largest size every stratum can fill."""
    pools = build_pools(inp, lang, build_id)
    sizes = [len(pools[l]) for l in LABELS]
    if n is None:
        n = 0
        lo, hi = 0, sum(sizes)
        while lo <= hi:
            mid = (lo + hi) // 2
            if all(c <= s for c, s in zip(largest_remainder(mid, ratio), sizes)):
                n, lo = mid, mid + 1
            else:
                hi = mid - 1
    counts = largest_remainder(n, ratio)
    out = []
    for label, c, s in zip(LABELS, counts, sizes):
        if c > s:
            raise GenerationStarved(lang, label, c, s)
        out.extend(pools[label][:c])
    out.sort(key=lambda c: c.claim_id)
    return out


# ------------------------------------------------------------ metrics


def _tokens(text: str) -> list[tuple[int, int]]:
    out, i, n = [], 0, len(text)
    while i < n:
        while i < n and text[i].isspace():
            i += 1
        j = i
        while j < n and not text[j].isspace():
            j += 1
        if j > i:
            out.append((i, j))
        i = j
    return out


def span_tokens(text: str, spans: Iterable) -> set[int]:
    """Whitespace-token indices overlapping any half-open span."""
    toks = _tokens(text)
    hit = set()
    for b, e in spans:
        for k, (s, t) in enumerate(toks):
            if s < e and b < t:
                hit.add(k)
    return hit


def token_f1(pred: set[int], gold: set[int]) -> float:
    if not pred or not gold:
        return 1.0 if not pred and not gold else 0.0
    tp = len(pred & gold)
    if tp == 0:
        return 0.0
    p, r = tp / len(pred), tp / len(gold)
    return 2 * p * r / (p + r)


@dataclass
class MfcReport:
    accuracy: float
    macro_f1: float
    recall_at_5: float
    span_f1: float
    n: int
    n_verifiable: int


def mfc_metrics(predictions: dict[str, dict], gold: list[MfcClaim | dict]) -> MfcReport:
    """``predictions[claim_id]`` = {label, evidence: [pointer, ...] best-first, spans: [[[b,e],...], ...]?}."""
    golds = [g.to_record() if isinstance(g, MfcClaim) else g for g in gold]
    if not golds:
        return MfcReport(0.0, 0.0, 0.0, 0.0, 0, 0)
    correct = 0
    tp = {l: 0 for l in LABELS}
    fp = {l: 0 for l in LABELS}
    fn = {l: 0 for l in LABELS}
    r5, sf1, nv = 0, 0.0, 0
    for g in golds:
        pred = predictions.get(g["claim_id"], {})
        pl = pred.get("label")
        if pl == g["label"]:
            correct += 1
            tp[pl] += 1
        else:
            fn[g["label"]] += 1
            if pl in fp:
                fp[pl] += 1
        if g["label"] == NEI:
            continue
        nv += 1
        gold_units = {unit_key(ev["pointer"]): ev for ev in g["gold_evidence"]}
        ranked = list(pred.get("evidence") or [])
        if any(unit_key(p) in gold_units for p in ranked[:5]):
            r5 += 1
        spans = pred.get("spans")
        best = 0.0
        if spans is not None:
            for p, sp in zip(ranked, spans):
                ev = gold_units.get(unit_key(p))
                if ev is None or sp is None:
                    continue
                text = ev["unit_text"]
                best = max(best, token_f1(span_tokens(text, sp), span_tokens(text, ev["spans"])))
        sf1 += best
    f1s = []
    for l in LABELS:
        if tp[l] + fp[l] + fn[l] == 0:
            continue
        denom = 2 * tp[l] + fp[l] + fn[l]
        f1s.append(2 * tp[l] / denom)
    n = len(golds)
    return MfcReport(correct / n, sum(f1s) / len(f1s) if f1s else 0.0,
                     r5 / nv if nv else 0.0, sf1 / nv if nv else 0.0, n, nv)
