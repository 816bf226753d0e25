"""Subject-page resolution and alignment of statements to evidence units."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path

from .canon import DomainTag, derive_id, sha256_hex
from .ingest import LinkTables, RawPage
from .literals import (
    Literal,
    find_all,
    parse_coordinates,
    parse_dates,
    parse_quantities,
    parse_value_templates,
    raw_wikilinks,
)
from .model import (
    GREGORIAN,
    MATCH_PRIORITY,
    VIEW_ORDER,
    FactStatement,
    MatchType,
    ReasonCode,
    TypedValue,
    ValueKind,
    ViewKind,
)
from .policy import DEFAULT_POLICY, PolicyViolation, norm_value
from .views import LanguagePack, PageViews, ViewUnit, build_page_views, locator_key, loose_text, template_name

C_BASE = {
    MatchType.INFOBOX_FIELD: Decimal("0.90"),
    MatchType.WIKILINK_ENTITY: Decimal("0.95"),
    MatchType.LEXICAL_VALUE: Decimal("0.80"),
    MatchType.LEAD_WEAK: Decimal("0.65"),
}
C_LOW, C_HIGH = Decimal("0.5"), Decimal("0.95")
Q6 = Decimal("0.000001")

RESOLVE_DIRECT = 1.0
RESOLVE_REDIRECT = 0.95
RESOLVE_FALLBACK = 0.9


class FactorOutOfRange(ValueError):
    pass


# ------------------------------------------------------------ schema map


class SchemaMap:
    """(language, template, param) -> PropertyId.  Table columns use template ``#table``."""

    TABLE = "#table"

    def __init__(self, rows: list[tuple[str, str, str, str]]):
        self.rows = sorted(rows)
        self._map: dict[tuple[str, str, str], str] = {}
        for lang, tpl, param, pid in self.rows:
            t = tpl if tpl == self.TABLE else template_name(tpl)
            self._map[(lang, t, param.strip().casefold())] = pid

    @classmethod
    def load(cls, path: str | Path) -> "SchemaMap":
        rows = []
        with open(path, encoding="utf-8", newline="") as fh:
            for row in csv.reader(fh, delimiter="\t"):
                if not row or row[0].startswith("#"):
                    continue
                if len(row) != 4:
                    raise ValueError(f"schema map row needs 4 columns: {row!r}")
                rows.append(tuple(c.strip() for c in row))
        return cls(rows)

    def lookup(self, lang: str, template: str, param: str) -> str | None:
        return self._map.get((lang, template, param.strip().casefold()))

    def templates(self, lang: str) -> list[str]:
        return sorted({t for (l, t, _), _p in self._map.items() if l == lang and t != self.TABLE})


# ------------------------------------------------------------ language index


@dataclass
class LanguageIndex:
    language: str
    pack: LanguagePack
    pages_by_title: dict[str, RawPage]
    links: LinkTables
    title_to_qid: dict[str, str]
    labels: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        self.pages_by_id = {p.page_id: p for p in self.pages_by_title.values()}
        self._casefold: dict[str, set[str]] = {}
        for t in self.title_to_qid:
            self._casefold.setdefault(t.casefold(), set()).add(t)
        self._link_cache: dict[str, tuple[str, float] | None] = {}

    @classmethod
    def build(cls, language, pack, pages, links: LinkTables, sitelinks: dict[str, str], labels=None):
        """``sitelinks`` maps page title -> QID for this language."""
        by_title = {}
        for p in pages:
            by_title[pack.title_norm(p.title)] = p
        redirects = {pack.title_norm(a): pack.title_norm(b) for a, b in links.redirects.items()}
        for p in by_title.values():
            if p.is_redirect and p.redirect_target:
                redirects.setdefault(pack.title_norm(p.title), pack.title_norm(p.redirect_target))
        nl = LinkTables(redirects=redirects, disambiguation_pages=set(links.disambiguation_pages))
        t2q = {pack.title_norm(t): q for t, q in sitelinks.items()}
        return cls(language, pack, by_title, nl, t2q, labels or {})

    def is_disambiguation(self, page: RawPage) -> bool:
        return page.page_id in self.links.disambiguation_pages

    def resolve_link(self, target: str) -> tuple[str, float] | None:
        """QID and resolution factor for a wikilink target, or None."""
        if target in self._link_cache:
            return self._link_cache[target]
        t = self.pack.title_norm(target)
        out: tuple[str, float] | None = None
        if t in self.title_to_qid:
            out = (self.title_to_qid[t], RESOLVE_DIRECT)
        else:
            final, hops = self.links.resolve(t)
            if final is not None and hops and final in self.title_to_qid:
                out = (self.title_to_qid[final], RESOLVE_REDIRECT)
            else:
                cands = self._casefold.get(t.casefold(), set())
                if len(cands) == 1:
                    out = (self.title_to_qid[next(iter(cands))], RESOLVE_FALLBACK)
        self._link_cache[target] = out
        return out


@dataclass
class SubjectResolution:
    page: RawPage | None
    c_resolve: float = 1.0
    detail: str = ""


def _follow(index: LanguageIndex, title: str) -> tuple[RawPage | None, int, str]:
    t = index.pack.title_norm(title)
    page = index.pages_by_title.get(t)
    hops = 0
    if page is not None and page.is_redirect or page is None and t in index.links.redirects:
        final, hops = index.links.resolve(t)
        if final is None:
            return None, hops, "redirect_cycle"
        page = index.pages_by_title.get(final)
    if page is None:
        return None, hops, "page_missing"
    if page.is_redirect:
        return None, hops, "redirect_unresolved"
    if page.namespace != 0:
        return None, hops, "not_main_namespace"
    if index.is_disambiguation(page):
        return None, hops, "disambiguation"
    return page, hops, ""


def resolve_subject_page(subject: str, language: str, sitelinks: dict[str, str], index: LanguageIndex,
                         fallback_enabled: bool = False, label: str | None = None) -> SubjectResolution:
    title = sitelinks.get(language)
    if title:
        page, hops, why = _follow(index, title)
        if page is None:
            return SubjectResolution(None, detail=why)
        return SubjectResolution(page, RESOLVE_REDIRECT if hops else RESOLVE_DIRECT)
    if not fallback_enabled or not label:
        return SubjectResolution(None, detail="no_sitelink")
    want = index.pack.fallback_key(label)
    hits = {}
    for t, p in index.pages_by_title.items():
        if t.casefold() != want:
            continue
        page, _hops, why = _follow(index, t)
        if page is not None:
            hits[page.page_id] = page
    if len(hits) != 1:
        return SubjectResolution(None, detail="fallback_ambiguous" if hits else "fallback_no_match")
    return SubjectResolution(next(iter(hits.values())), RESOLVE_FALLBACK)


# ------------------------------------------------------------ scoring


def c_dtype(v: TypedValue) -> Decimal:
    if v.kind is ValueKind.TIME:
        return {9: Decimal("0.90"), 10: Decimal("0.95")}.get(v.precision, Decimal(1))
    if v.kind in (ValueKind.QUANTITY, ValueKind.COORDINATE):
        return Decimal("0.95")
    return Decimal(1)


def c_amb(k: int) -> float:
    return 1.0 / (1.0 + math.log2(1 + k))


def sanity_ok(v: TypedValue) -> bool:
    if v.kind is ValueKind.TIME:
        y = int(v.time.lstrip("+-").split("-", 1)[0])
        return y <= 2100
    if v.kind is ValueKind.COORDINATE:
        return abs(v.latitude) <= 90 and abs(v.longitude) <= 180
    if v.kind is ValueKind.QUANTITY:
        return abs(v.amount) < Decimal("1e15")
    return True


def _dec6(x) -> Decimal:
    d = x if isinstance(x, Decimal) else Decimal(repr(float(x)))
    return d.quantize(Q6, rounding=ROUND_HALF_EVEN)


def score_confidence(match_type: MatchType, dtype: Decimal | float = 1, resolve: Decimal | float = 1,
                     ambiguity: int = 0, sanity: bool = True) -> Decimal:
    """Product of the factors, clipped to [0.5, 0.95] and quantized to 6 places."""
    base = C_BASE[MatchType(match_type)]
    amb = c_amb(ambiguity) if ambiguity >= 0 else -1.0
    factors = {"dtype": Decimal(str(dtype)), "resolve": Decimal(repr(float(resolve))),
               "amb": Decimal(repr(amb)), "sanity": Decimal(1) if sanity else Decimal("0.8")}
    for name, v in factors.items():
        if not Decimal(0) < v <= Decimal(1):
            raise FactorOutOfRange(f"{name}={v}")
    c = base
    for v in factors.values():
        c *= v
    return _dec6(min(C_HIGH, max(C_LOW, c)))


# ------------------------------------------------------------ senses


@dataclass
class EvidencePointer:
    language: str
    page_id: int
    revision_id: int
    view: ViewKind
    locator: dict
    start: int
    end: int
    norm_id: str
    unit_sha256: str = ""
    unit_loose_sha256: str = ""

    def to_record(self) -> dict:
        return {
            "language": self.language,
            "page_id": self.page_id,
            "revision_id": self.revision_id,
            "view": self.view.value,
            "locator": self.locator,
            "start": self.start,
            "end": self.end,
            "norm_id": self.norm_id,
            "unit_sha256": self.unit_sha256,
            "unit_loose_sha256": self.unit_loose_sha256,
            "pointer_stable": True,
        }

    @classmethod
    def from_record(cls, r: dict) -> "EvidencePointer":
        return cls(r["language"], int(r["page_id"]), int(r["revision_id"]), ViewKind(r["view"]), dict(r["locator"]),
                   int(r["start"]), int(r["end"]), r["norm_id"], r.get("unit_sha256", ""),
                   r.get("unit_loose_sha256", ""))

    def sort_key(self) -> tuple:
        return (VIEW_ORDER[self.view], locator_key(self.view, self.locator), self.start, self.end)


def pointer_for(unit: ViewUnit, page: RawPage, language: str, start: int, end: int) -> EvidencePointer:
    return EvidencePointer(
        language=language,
        page_id=page.page_id,
        revision_id=page.revision_id,
        view=unit.view,
        locator=dict(unit.locator),
        start=start,
        end=end,
        norm_id=unit.norm_id,
        unit_sha256=sha256_hex(unit.text),
        unit_loose_sha256=sha256_hex(loose_text(unit.text)),
    )


@dataclass
class FactSense:
    factsense_id: str
    statement_id: str
    language: str
    pointer: EvidencePointer
    match_type: MatchType
    confidence: Decimal
    pack_id: str
    tool_version: str
    alternatives: list[str]
    sentence: str
    unit_text: str
    page_title: str = ""
    synset_id: str = ""

    def to_record(self) -> dict:
        return {
            "factsense_id": self.factsense_id,
            "statement_id": self.statement_id,
            "synset_id": self.synset_id,
            "language": self.language,
            "pointer": self.pointer.to_record(),
            "match_type": self.match_type.value,
            "confidence": self.confidence,
            "provenance": {"pack_id": self.pack_id, "tool_version": self.tool_version,
                           "alternatives": self.alternatives},
        }

    def text_record(self) -> dict:
        p = self.pointer
        return {
            "factsense_id": self.factsense_id,
            "language": self.language,
            "sentence": self.sentence,
            "unit_text": self.unit_text,
            "attribution": {
                "source_title": self.page_title,
                "page_id": p.page_id,
                "revision_id": p.revision_id,
                "language": self.language,
                "license": "CC BY-SA 4.0",
            },
        }


@dataclass
class UngroundedReason:
    statement_id: str
    language: str
    code: ReasonCode
    stage: str
    detail: str = ""

    @property
    def id(self) -> str:
        return f"{self.statement_id}|{self.language}"

    def to_record(self) -> dict:
        return {"id": self.id, "statement_id": self.statement_id, "language": self.language,
                "code": self.code.value, "stage": self.stage, "detail": self.detail}


@dataclass
class Candidate:
    unit: ViewUnit
    match_type: MatchType
    start: int
    end: int
    resolve: float = RESOLVE_DIRECT
    excluded: bool = False

    @property
    def surface(self) -> str:
        return self.unit.text[self.start:self.end]

    def order_key(self) -> tuple:
        return (-MATCH_PRIORITY[self.match_type], VIEW_ORDER[self.unit.view], self.unit.key, self.start, self.end)


# ------------------------------------------------------------ per-page analysis


@dataclass
class UnitAnalysis:
    dates: list[Literal]
    quantities: list[Literal]
    coords: list[Literal]
    raw_links: list[tuple[int, int, str]]


class PageContext:
    """Views of one page plus lazily parsed literals per unit."""

    def __init__(self, page: RawPage, views: PageViews, index: LanguageIndex):
        self.page = page
        self.views = views
        self.index = index
        self._analysis: dict[tuple, UnitAnalysis] = {}

    @classmethod
    def build(cls, page: RawPage, index: LanguageIndex, allowlist) -> "PageContext":
        return cls(page, build_page_views(page.wikitext, index.pack, allowlist), index)

    def analysis(self, unit: ViewUnit) -> UnitAnalysis:
        a = self._analysis.get(unit.key)
        if a is None:
            pack = self.index.pack
            text = unit.text
            dates = parse_dates(text, pack)
            quants = parse_quantities(text, pack)
            coords = parse_coordinates(text)
            links: list[tuple[int, int, str]] = []
            if unit.view is ViewKind.INFOBOX_FIELD:
                tpl = parse_value_templates(text, pack)
                dates = [l for l in tpl if l.value.kind is ValueKind.TIME] + dates
                quants = [l for l in tpl if l.value.kind is ValueKind.QUANTITY] + quants
                coords = [l for l in tpl if l.value.kind is ValueKind.COORDINATE] + coords
                links = raw_wikilinks(text)
            a = UnitAnalysis(dates, quants, coords, links)
            self._analysis[unit.key] = a
        return a


# ------------------------------------------------------------ matchers


def _safe_norm(prop: str, v: TypedValue, policy) -> str | None:
    try:
        return norm_value(prop, v, policy)[0]
    except PolicyViolation:
        return None


def _literal_verdict(f: FactStatement, lit: Literal, policy) -> str:
    """'match', 'type' (rejected only by a type constraint) or 'no'."""
    v = f.value
    lv = lit.value
    if lv.kind is not v.kind:
        return "no"
    target = _safe_norm(f.property, v, policy)
    got = _safe_norm(f.property, lv, policy)
    if target is not None and got == target:
        return "match"
    if v.kind is ValueKind.TIME:
        if (v.calendar or GREGORIAN) != GREGORIAN:
            return "no"
        if lv.precision > v.precision:
            coarse = TypedValue.time_(lv.time, v.precision)
            if _safe_norm(f.property, coarse, policy) == target:
                return "match"
        elif lv.precision < v.precision:
            coarse_v = TypedValue.time_(v.time, lv.precision)
            if _safe_norm(f.property, coarse_v, policy) == got:
                return "type"
        return "no"
    if v.kind is ValueKind.QUANTITY:
        if lv.amount == v.amount and (lv.unit or "1") != (v.unit or "1"):
            return "type"
        return "no"
    return "no"


def _typed_literals(a: UnitAnalysis, kind: ValueKind) -> list[Literal]:
    if kind is ValueKind.TIME:
        return a.dates
    if kind is ValueKind.QUANTITY:
        return a.quantities
    if kind is ValueKind.COORDINATE:
        return a.coords
    return []


_TYPED = (ValueKind.TIME, ValueKind.QUANTITY, ValueKind.COORDINATE)
_TEXTUAL = (ValueKind.STRING, ValueKind.EXTERNAL_ID, ValueKind.MONOTEXT)


@dataclass
class MatchLog:
    type_rejected: bool = False
    excluded_hit: bool = False


def _literal_candidates(f, unit, ctx, policy, mt: MatchType, log: MatchLog) -> list[Candidate]:
    out = []
    for lit in _typed_literals(ctx.analysis(unit), f.value.kind):
        if lit.approx:
            continue
        verdict = _literal_verdict(f, lit, policy)
        if verdict == "match":
            out.append(Candidate(unit, mt, lit.start, lit.end))
        elif verdict == "type":
            log.type_rejected = True
    return out


def _text_needles(f: FactStatement, language: str) -> list[str]:
    v = f.value
    if v.kind is ValueKind.MONOTEXT and v.language != language:
        return []
    t = (v.text or "").strip()
    return [t] if t else []


def match_structure(f: FactStatement, units: list[ViewUnit], schema_map: SchemaMap, ctx: PageContext,
                    policy=DEFAULT_POLICY, log: MatchLog | None = None) -> list[Candidate]:
    log = log or MatchLog()
    lang = ctx.index.language
    out: list[Candidate] = []
    for unit in units:
        if unit.view is ViewKind.INFOBOX_FIELD:
            pid = schema_map.lookup(lang, unit.template, unit.locator["param"])
        else:
            pid = schema_map.lookup(lang, SchemaMap.TABLE, unit.header) if unit.header else None
        if pid != f.property:
            continue
        k = f.value.kind
        if k is ValueKind.ENTITY:
            if unit.view is ViewKind.INFOBOX_FIELD:
                spans = ctx.analysis(unit).raw_links
            else:
                spans = [(l.start, l.end, l.target) for l in unit.links]
            for s, e, target in spans:
                r = ctx.index.resolve_link(target)
                if r is not None and r[0] == f.value.entity:
                    out.append(Candidate(unit, MatchType.INFOBOX_FIELD, s, e, r[1]))
        elif k in _TYPED:
            out.extend(_literal_candidates(f, unit, ctx, policy, MatchType.INFOBOX_FIELD, log))
        elif k in _TEXTUAL:
            for needle in _text_needles(f, lang):
                for s, e in find_all(unit.text, needle):
                    out.append(Candidate(unit, MatchType.INFOBOX_FIELD, s, e))
    return out


def match_link(f: FactStatement, units: list[ViewUnit], ctx: PageContext) -> list[Candidate]:
    if f.value.kind is not ValueKind.ENTITY:
        return []
    out = []
    for unit in units:
        if unit.view is not ViewKind.SENTENCE:
            continue
        for link in unit.links:
            r = ctx.index.resolve_link(link.target)
            if r is not None and r[0] == f.value.entity:
                out.append(Candidate(unit, MatchType.WIKILINK_ENTITY, link.start, link.end, r[1], unit.excluded))
    return out


def match_lexical(f: FactStatement, units: list[ViewUnit], ctx: PageContext, policy=DEFAULT_POLICY,
                  log: MatchLog | None = None) -> list[Candidate]:
    log = log or MatchLog()
    k = f.value.kind
    lang = ctx.index.language
    out: list[Candidate] = []
    for unit in units:
        if unit.view is ViewKind.INFOBOX_FIELD:
            continue
        if k in _TYPED:
            for c in _literal_candidates(f, unit, ctx, policy, MatchType.LEXICAL_VALUE, log):
                c.excluded = unit.excluded
                out.append(c)
        elif k in _TEXTUAL:
            mt = MatchType.LEAD_WEAK if unit.lead and unit.view is ViewKind.SENTENCE else MatchType.LEXICAL_VALUE
            for needle in _text_needles(f, lang):
                for s, e in find_all(unit.text, needle):
                    out.append(Candidate(unit, mt, s, e, excluded=unit.excluded))
        elif k is ValueKind.ENTITY and unit.view is ViewKind.SENTENCE and unit.lead:
            for needle in sorted(set(ctx.index.labels.get(f.value.entity, []))):
                for s, e in find_all(unit.text, needle):
                    out.append(Candidate(unit, MatchType.LEAD_WEAK, s, e, excluded=unit.excluded))
    return out


@dataclass
class Dedup:
    kept: Candidate
    alternatives: list[str]
    ambiguity: int


def dedup_candidates(cands: list[Candidate]) -> list[Dedup]:
    """One winner per unit; suppressed match types kept as alternatives."""
    by_unit: dict[tuple, list[Candidate]] = {}
    for c in cands:
        by_unit.setdefault(c.unit.key, []).append(c)
    out = []
    for key in sorted(by_unit, key=lambda k: (VIEW_ORDER[by_unit[k][0].unit.view], k)):
        group = sorted(by_unit[key], key=Candidate.order_key)
        kept = group[0]
        sig = (kept.match_type, kept.start, kept.end)
        alts = sorted({c.match_type for c in group[1:] if (c.match_type, c.start, c.end) != sig},
                      key=lambda m: -MATCH_PRIORITY[m])
        spans = {(c.start, c.end) for c in group if c.surface == kept.surface}
        out.append(Dedup(kept, [m.value for m in alts], len(spans) - 1))
    return out


# ------------------------------------------------------------ orchestration


@dataclass
class GroundingOutcome:
    senses: list[FactSense]
    reason: UngroundedReason | None


def ground_statement(f: FactStatement, ctx: PageContext | None, schema_map: SchemaMap, build_id: str,
                     tool_version: str, policy=DEFAULT_POLICY, language: str | None = None,
                     page_detail: str = "", subject_resolve: float = RESOLVE_DIRECT) -> GroundingOutcome:
    lang = language or (ctx.index.language if ctx else "")
    if ctx is None:
        return GroundingOutcome([], UngroundedReason(f.statement_id, lang, ReasonCode.NO_VALID_TEXT,
                                                     "page_retrieval", f"page_unresolved:{page_detail}"))
    views = ctx.views
    units = views.all_units()
    if not units:
        detail = f"degenerate:{views.degenerate}" if views.degenerate else "empty_views"
        return GroundingOutcome([], UngroundedReason(f.statement_id, lang, ReasonCode.NO_VALID_TEXT,
                                                     "unit_construction", detail))
    log = MatchLog()
    cands = match_structure(f, views.infobox + views.tables, schema_map, ctx, policy, log)
    cands += match_link(f, views.sentences, ctx)
    cands += match_lexical(f, views.tables + views.sentences, ctx, policy, log)
    live = [c for c in cands if not c.excluded]
    if len(live) != len(cands):
        log.excluded_hit = True
    senses = []
    pack = ctx.index.pack
    for d in dedup_candidates(live):
        c = d.kept
        conf = score_confidence(c.match_type, c_dtype(f.value), min(c.resolve, subject_resolve), d.ambiguity,
                                sanity_ok(f.value))
        ptr = pointer_for(c.unit, ctx.page, lang, c.start, c.end)
        fid = derive_id(DomainTag.FACTSENSE, build_id,
                        {"statement_id": f.statement_id, "page_id": ctx.page.page_id, "pointer": ptr.to_record()})
        senses.append(FactSense(fid, f.statement_id, lang, ptr, c.match_type, conf, pack.pack_id, tool_version,
                                d.alternatives, c.surface, c.unit.text, ctx.page.title))
    if senses:
        return GroundingOutcome(senses, None)
    if log.excluded_hit:
        code = ReasonCode.SCOPE_EXCLUDED
    elif log.type_rejected:
        code = ReasonCode.DATATYPE_MISMATCH
    else:
        code = ReasonCode.NO_MATCH_FOUND
    return GroundingOutcome([], UngroundedReason(f.statement_id, lang, code, "matching"))

