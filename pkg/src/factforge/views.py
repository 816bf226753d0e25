"""Provenance-stable text views of a page: sentences, infobox fields and table cells.

Templates are stripped, never expanded.  All offsets are codepoint offsets
into strings produced by :func:`norm_text`.
"""
from __future__ import annotations

import hashlib
import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import mwparserfromhell
from mwparserfromhell.nodes import (
    Argument,
    Comment,
    ExternalLink,
    Heading,
    HTMLEntity,
    Tag,
    Template,
    Text,
    Wikilink,
)

from .canon import canon_serialize
from .model import ViewKind

RENDERER_VERSION = "plain-1"

LINK_OPEN = "﷐"
LINK_CLOSE = "﷑"
_MARKERS = LINK_OPEN + LINK_CLOSE

ZERO_WIDTH = "​‌‍⁠﻿"
DIRECTIONAL = "‎‏‪‫‬‭‮⁦⁧⁨⁩"
_STRIP_TABLE = {ord(c): None for c in ZERO_WIDTH + DIRECTIONAL}
_ENTITY_RE = re.compile(r"&(amp|lt|gt|quot|apos|nbsp);")
_ENTITIES = {"amp": "&", "lt": "<", "gt": ">", "quot": '"', "apos": "'", "nbsp": " "}
_WS_RE = re.compile(r"\s+")
_HWS_RE = re.compile(r"[^\S\n]+")


class ParseDegenerate(ValueError):
    pass


class TableMalformed(ValueError):
    pass


@dataclass
class LanguagePack:
    language: str
    backend: str = "rule_based"
    normalization: dict = field(default_factory=lambda: {"unicode_form": "NFC", "whitespace": "view"})
    terminal_punct: str = ".!?"
    suppression_pairs: list = field(default_factory=lambda: [["(", ")"], ["[", "]"]])
    abbreviation_exceptions: list = field(default_factory=list)
    min_sentence_length: int = 2
    max_suppression_span: int = 400
    wiki_rules: dict = field(default_factory=dict)
    excluded_sections: list = field(default_factory=list)
    approximation_markers: list = field(default_factory=list)
    months: dict = field(default_factory=dict)
    date_patterns: list = field(default_factory=list)
    unit_symbols: dict = field(default_factory=dict)
    decimal_separator: str = "."
    group_separator: str = ","
    model_id: str | None = None

    def content(self) -> dict:
        return {
            "language": self.language,
            "backend": self.backend,
            "normalization": self.normalization,
            "terminal_punct": self.terminal_punct,
            "suppression_pairs": self.suppression_pairs,
            "abbreviation_exceptions": self.abbreviation_exceptions,
            "min_sentence_length": self.min_sentence_length,
            "max_suppression_span": self.max_suppression_span,
            "wiki_rules": self.wiki_rules,
            "excluded_sections": self.excluded_sections,
            "approximation_markers": self.approximation_markers,
            "months": self.months,
            "date_patterns": self.date_patterns,
            "unit_symbols": self.unit_symbols,
            "decimal_separator": self.decimal_separator,
            "group_separator": self.group_separator,
            "model_id": self.model_id,
        }

    @property
    def pack_id(self) -> str:
        return hashlib.sha256(canon_serialize(self.content())).hexdigest()

    @classmethod
    def from_record(cls, r: dict) -> "LanguagePack":
        r = dict(r)
        r.pop("pack_id", None)
        return cls(**r)

    @classmethod
    def load(cls, path: str | Path) -> "LanguagePack":
        with open(path, encoding="utf-8") as fh:
            return cls.from_record(json.load(fh))

    def norm_id(self, view: ViewKind) -> str:
        rec = {"view": view.value, "pack_id": self.pack_id, "renderer": RENDERER_VERSION}
        return hashlib.sha1(canon_serialize(rec)).hexdigest()[:16]

    # title rules
    def title_norm(self, title: str) -> str:
        t = title.replace("_", " ")
        t = unicodedata.normalize("NFC", _WS_RE.sub(" ", t).strip())
        if self.wiki_rules.get("capitalize_first", True) and t:
            t = t[0].upper() + t[1:]
        return t

    def fallback_key(self, title: str) -> str:
        return self.title_norm(title).casefold()

    def skipped_link_prefixes(self) -> set[str]:
        return {p.casefold() for p in self.wiki_rules.get("media_prefixes", ["File", "Image", "Category"])}


# ------------------------------------------------------------ normalization


def norm_text(raw: str, view: ViewKind, pack: LanguagePack | None = None) -> str:
    """Normalize a unit string: newlines, bounded entity decoding, zero-width removal, NFC, whitespace."""
    form = "NFC"
    if pack is not None:
        form = pack.normalization.get("unicode_form", "NFC")
    s = raw.replace("\r\n", "\n").replace("\r", "\n")
    s = _ENTITY_RE.sub(lambda m: _ENTITIES[m.group(1)], s)
    s = s.translate(_STRIP_TABLE)
    s = unicodedata.normalize(form, s)
    if view is ViewKind.SENTENCE:
        return _WS_RE.sub(" ", s).strip()
    lines = [_HWS_RE.sub(" ", ln).strip() for ln in s.split("\n")]
    out: list[str] = []
    for ln in lines:
        if ln or (out and out[-1]):
            out.append(ln)
    while out and not out[-1]:
        out.pop()
    return "\n".join(out)


def loose_text(s: str) -> str:
    """Whitespace- and control-character-insensitive form used to detect drift."""
    s = "".join(ch for ch in s if unicodedata.category(ch) not in ("Cc", "Cf") or ch in " \n\t")
    return _WS_RE.sub(" ", s).strip()


def extract_markers(s: str) -> tuple[str, list[tuple[int, int]]]:
    """Drop link markers from ``s`` and return anchor intervals in clean coordinates."""
    out = []
    spans = []
    opened: list[int] = []
    pos = 0
    for ch in s:
        if ch == LINK_OPEN:
            opened.append(pos)
        elif ch == LINK_CLOSE:
            if opened:
                spans.append((opened.pop(), pos))
        else:
            out.append(ch)
            pos += 1
    spans.sort()
    return "".join(out), spans


# ------------------------------------------------------------ segmentation

SegmenterBackend = Callable[[str, str], list[tuple[int, int]]]
_BACKENDS: dict[str, SegmenterBackend] = {}


def register_backend(name: str, fn: SegmenterBackend) -> None:
    """Register an external segmenter taking (text, language) -> intervals."""
    _BACKENDS[name] = fn


def segment_rule_based(text: str, pack: LanguagePack) -> list[tuple[int, int]]:
    punct = set(pack.terminal_punct)
    opens: dict[str, str] = {}
    closes: dict[str, str] = {}
    for o, c in pack.suppression_pairs:
        opens[o] = c
        closes[c] = o
    exceptions = set(pack.abbreviation_exceptions)
    n = len(text)
    stack: list[str] = []
    opened_at = 0
    ends: list[int] = []
    i = 0
    while i < n:
        ch = text[i]
        if stack and i - opened_at > pack.max_suppression_span:
            stack.clear()
        if ch in opens and not (opens[ch] == ch and stack and stack[-1] == ch):
            if not stack:
                opened_at = i
            stack.append(ch)
        elif ch in closes:
            if stack and stack[-1] == closes[ch]:
                stack.pop()
        elif ch in punct and not stack:
            j = i + 1
            while j < n and text[j] in punct:
                j += 1
            if j < n and not text[j].isspace() and ch.isascii():
                i = j
                continue
            k = i
            while k > 0 and not text[k - 1].isspace():
                k -= 1
            if text[k:j] not in exceptions:
                ends.append(j)
            i = j
            continue
        i += 1
    segs: list[list[int]] = []
    start = 0
    for e in ends + [n]:
        s = start
        while s < e and text[s].isspace():
            s += 1
        t = e
        while t > s and text[t - 1].isspace():
            t -= 1
        if t > s:
            segs.append([s, t])
        start = e
    floor = pack.min_sentence_length
    merged: list[list[int]] = []
    carry = None
    for s, e in segs:
        if carry is not None:
            s = carry
            carry = None
        if sum(1 for ch in text[s:e] if not ch.isspace()) < floor:
            carry = s
            continue
        merged.append([s, e])
    if carry is not None:
        if merged:
            merged[-1][1] = segs[-1][1]
        else:
            merged.append([carry, segs[-1][1]])
    return [(s, e) for s, e in merged]


def segment(text: str, pack: LanguagePack) -> list[tuple[int, int]]:
    if pack.backend == "rule_based":
        return segment_rule_based(text, pack)
    fn = _BACKENDS.get(pack.backend)
    if fn is None:
        raise ValueError(f"no segmentation backend registered for {pack.backend!r}")
    return [tuple(x) for x in fn(text, pack.language)]


# ------------------------------------------------------------ rendering

_SKIP_TAGS = {"ref", "references", "gallery", "table", "timeline", "math", "score", "syntaxhighlight",
              "source", "templatestyles", "imagemap", "graph", "mapframe", "noinclude", "includeonly"}
_BREAK_TAGS = {"li", "dt", "dd", "hr", "p"}
_MAGIC_RE = re.compile(r"__[A-Z]+__")
_EMPTY_PARENS_RE = re.compile(r"\(\s*[,;:]?\s*\)")


@dataclass
class Link:
    start: int
    end: int
    target: str


class _Renderer:
    def __init__(self, pack: LanguagePack):
        self.pack = pack
        self.skip_prefixes = pack.skipped_link_prefixes()
        self.targets: list[str] = []
        self.in_list = False

    def render(self, nodes, out: list[str]) -> None:
        for node in nodes:
            if isinstance(node, Text):
                s = _MAGIC_RE.sub("", str(node.value)).replace(LINK_OPEN, "").replace(LINK_CLOSE, "")
                if self.in_list and "\n" in s:
                    s = s.replace("\n", "\n\n", 1)
                    self.in_list = False
                out.append(s)
            elif isinstance(node, Wikilink):
                self._link(node, out)
            elif isinstance(node, (Template, Comment, Argument)):
                continue
            elif isinstance(node, HTMLEntity):
                out.append(str(node))
            elif isinstance(node, ExternalLink):
                if node.brackets:
                    if node.title is not None:
                        self.render(node.title.nodes, out)
                else:
                    out.append(str(node.url))
            elif isinstance(node, Heading):
                out.append("\n\n")
                self.render(node.title.nodes, out)
                out.append("\n\n")
            elif isinstance(node, Tag):
                tag = str(node.tag).strip().lower()
                if tag in _SKIP_TAGS:
                    continue
                if tag == "nowiki":
                    if node.contents is not None:
                        out.append(str(node.contents))
                    continue
                if tag == "br":
                    out.append(" ")
                    continue
                if tag in _BREAK_TAGS:
                    out.append("\n\n")
                    if tag in ("li", "dt", "dd"):
                        self.in_list = True
                if node.contents is not None:
                    self.render(node.contents.nodes, out)
            else:
                out.append(str(node))

    def _link(self, node: Wikilink, out: list[str]) -> None:
        title = str(node.title).strip()
        colon_lead = title.startswith(":")
        if not colon_lead and ":" in title:
            prefix = title.split(":", 1)[0].strip().casefold()
            if prefix in self.skip_prefixes:
                return
        title = title.lstrip(":")
        if node.text is not None:
            buf: list[str] = []
            self.render(node.text.nodes, buf)
            display = "".join(buf)
        else:
            display = title
        display = display.replace("\n", " ")
        stripped = display.strip()
        if not stripped:
            out.append(display)
            return
        lead = display[: len(display) - len(display.lstrip())]
        trail = display[len(display.rstrip()):]
        out.append(lead + LINK_OPEN + stripped + LINK_CLOSE + trail)
        self.targets.append(title.split("#", 1)[0])


def render_plain(nodes, pack: LanguagePack) -> tuple[str, list[str]]:
    """Plain text with link markers, and link targets in marker order."""
    r = _Renderer(pack)
    out: list[str] = []
    r.render(nodes, out)
    return "".join(out).replace("\r\n", "\n").replace("\r", "\n"), r.targets


def _finish_unit(marked: str, targets: list[str], view: ViewKind, pack: LanguagePack) -> tuple[str, list[Link]]:
    normed = norm_text(marked, view, pack)
    clean, _ = extract_markers(normed)
    links = [Link(s, e, t) for (s, e), t in zip(_ordered_spans(normed), targets) if e > s]
    return clean, links


def _ordered_spans(normed: str) -> list[tuple[int, int]]:
    # spans in opening order, matching target order
    spans: list[tuple[int, int]] = []
    stack: list[int] = []
    order: list[int] = []
    pos = 0
    for ch in normed:
        if ch == LINK_OPEN:
            order.append(len(spans))
            spans.append((pos, pos))
            stack.append(len(spans) - 1)
        elif ch == LINK_CLOSE:
            if stack:
                idx = stack.pop()
                spans[idx] = (spans[idx][0], pos)
        else:
            pos += 1
    return spans


# ------------------------------------------------------------ views


@dataclass
class ViewUnit:
    view: ViewKind
    locator: dict
    text: str
    norm_id: str
    links: list[Link] = field(default_factory=list)
    section: str = ""
    lead: bool = False
    excluded: bool = False
    interval: tuple[int, int] | None = None
    template: str = ""
    header: str = ""

    @property
    def key(self) -> tuple:
        return locator_key(self.view, self.locator)


def locator_key(view: ViewKind, loc: dict) -> tuple:
    if view is ViewKind.SENTENCE:
        return (2, loc["sentence_index"])
    if view is ViewKind.INFOBOX_FIELD:
        return (0, loc["template_path"], loc["param"])
    return (1, loc["table"], loc["row"], loc["col"])


def _sections(code) -> list[tuple[str, list]]:
    sections: list[tuple[str, list]] = [("", [])]
    for node in code.nodes:
        if isinstance(node, Heading):
            title = norm_text(str(node.title.strip_code()), ViewKind.SENTENCE)
            sections.append((title, []))
        else:
            sections[-1][1].append(node)
    return sections


_BLOCK_SPLIT = re.compile(r"\n[^\S\n]*\n")


def parse_wikitext(wikitext: str):
    try:
        return mwparserfromhell.parse(wikitext)
    except Exception as exc:  # parser failures are data, not crashes
        raise ParseDegenerate(str(exc)) from exc


@dataclass
class SentenceView:
    units: list[ViewUnit]
    stream: str


def build_sentence_view(wikitext: str, pack: LanguagePack, code=None) -> SentenceView:
    """Sentence units in stream order; ``stream`` is the blocks' normalized text joined by LF."""
    if code is None:
        code = parse_wikitext(wikitext)
    excluded = {s.casefold() for s in pack.excluded_sections}
    norm_id = pack.norm_id(ViewKind.SENTENCE)
    units: list[ViewUnit] = []
    blocks: list[str] = []
    offset = 0
    for sec_idx, (title, nodes) in enumerate(_sections(code)):
        marked, targets = render_plain(nodes, pack)
        t_iter = iter(targets)
        for raw_block in _BLOCK_SPLIT.split(marked):
            n_links = raw_block.count(LINK_OPEN)
            block_targets = [next(t_iter) for _ in range(n_links)]
            raw_block = _EMPTY_PARENS_RE.sub("", raw_block)
            normed = norm_text(raw_block, ViewKind.SENTENCE, pack)
            clean, _ = extract_markers(normed)
            if not clean:
                continue
            links = [Link(s, e, t) for (s, e), t in zip(_ordered_spans(normed), block_targets)]
            if blocks:
                offset += 1
            base = offset
            blocks.append(clean)
            offset += len(clean)
            for s, e in segment(clean, pack):
                ulinks = [Link(l.start - s, l.end - s, l.target) for l in links if l.start >= s and l.end <= e and l.end > l.start]
                units.append(
                    ViewUnit(
                        view=ViewKind.SENTENCE,
                        locator={"sentence_index": len(units)},
                        text=clean[s:e],
                        norm_id=norm_id,
                        links=ulinks,
                        section=title,
                        lead=sec_idx == 0,
                        excluded=title.casefold() in excluded,
                        interval=(base + s, base + e),
                    )
                )
    return SentenceView(units, "\n".join(blocks))


def template_name(raw: str) -> str:
    t = raw.strip().replace("_", " ")
    t = _WS_RE.sub(" ", t)
    if t.lower().startswith("template:"):
        t = t[len("template:"):].strip()
    return t[:1].upper() + t[1:] if t else t


def build_template_view(wikitext: str, allowlist, pack: LanguagePack | None = None, code=None,
                        skipped: list | None = None) -> list[ViewUnit]:
    """One unit per named parameter of every allowlisted template, in traversal order."""
    if code is None:
        code = parse_wikitext(wikitext)
    allowed = {template_name(a) for a in allowlist}
    norm_id = pack.norm_id(ViewKind.INFOBOX_FIELD) if pack is not None else "default"
    counts: dict[str, int] = {}
    units: list[ViewUnit] = []
    for tpl in code.filter_templates(recursive=True):
        raw_name = str(tpl.name)
        if any(c in raw_name for c in "{}[]|<>"):
            if skipped is not None:
                skipped.append(("unparseable_template_name", raw_name.strip()))
            continue
        name = template_name(raw_name)
        if name not in allowed:
            continue
        path = f"{name}#{counts.get(name, 0)}"
        counts[name] = counts.get(name, 0) + 1
        by_param: dict[str, ViewUnit] = {}
        for param in tpl.params:
            if not param.showkey:
                continue
            pname = str(param.name).strip()
            if not pname:
                continue
            text = norm_text(str(param.value), ViewKind.INFOBOX_FIELD, pack)
            by_param[pname] = ViewUnit(
                view=ViewKind.INFOBOX_FIELD,
                locator={"template_path": path, "param": pname},
                text=text,
                norm_id=norm_id,
                template=name,
            )
        units.extend(by_param.values())
    return units


def _span_attr(cell: Tag, name: str) -> int:
    for attr in cell.attributes:
        if str(attr.name).strip().lower() == name:
            raw = str(attr.value).strip().strip('"').strip("'")
            try:
                v = int(raw)
            except ValueError as exc:
                raise TableMalformed(f"bad {name}={raw!r}") from exc
            if v < 1 or v > 1000:
                raise TableMalformed(f"{name} out of range: {v}")
            return v
    return 1


def _table_rows(table: Tag) -> list[list[Tag]]:
    rows: list[list[Tag]] = []
    implicit: list[Tag] = []
    for node in table.contents.nodes:
        if not isinstance(node, Tag):
            continue
        tag = str(node.tag).lower()
        if tag in ("td", "th"):
            implicit.append(node)
        elif tag == "tr":
            if implicit:
                rows.append(implicit)
                implicit = []
            rows.append([c for c in node.contents.nodes if isinstance(c, Tag) and str(c.tag).lower() in ("td", "th")])
    if implicit:
        rows.append(implicit)
    return [r for r in rows if r]


def build_table_view(wikitext: str, pack: LanguagePack | None = None, code=None,
                     stats: dict | None = None) -> list[ViewUnit]:
    """Cells of every table in document order, anchored at their top-left grid coordinate."""
    if code is None:
        code = parse_wikitext(wikitext)
    if pack is None:
        pack = LanguagePack("und")
    norm_id = pack.norm_id(ViewKind.TABLE_CELL)
    tables = code.filter_tags(matches=lambda n: str(n.tag).lower() == "table", recursive=True)
    units: list[ViewUnit] = []
    for ti, table in enumerate(tables):
        try:
            rows = _table_rows(table)
            if not rows:
                raise TableMalformed("table has no cells")
            occupied: set[tuple[int, int]] = set()
            placed = []
            for r, cells in enumerate(rows):
                c = 0
                for cell in cells:
                    while (r, c) in occupied:
                        c += 1
                    rs = _span_attr(cell, "rowspan")
                    cs = _span_attr(cell, "colspan")
                    for rr in range(r, r + rs):
                        for cc in range(c, c + cs):
                            occupied.add((rr, cc))
                    placed.append((r, c, cell))
                    c += cs
        except TableMalformed:
            if stats is not None:
                stats["tables_malformed"] = stats.get("tables_malformed", 0) + 1
            continue
        headers = {}
        table_units = []
        for r, c, cell in placed:
            marked, targets = render_plain(cell.contents.nodes if cell.contents is not None else [], pack)
            text, links = _finish_unit(marked, targets, ViewKind.TABLE_CELL, pack)
            if r == 0 and str(cell.tag).lower() == "th":
                headers[c] = text
            table_units.append(
                ViewUnit(
                    view=ViewKind.TABLE_CELL,
                    locator={"table": ti, "row": r, "col": c},
                    text=text,
                    norm_id=norm_id,
                    links=links,
                )
            )
        for u in table_units:
            u.header = headers.get(u.locator["col"], "")
        units.extend(table_units)
    return units


@dataclass
class PageViews:
    sentences: list[ViewUnit]
    infobox: list[ViewUnit]
    tables: list[ViewUnit]
    stream: str = ""
    degenerate: str | None = None
    stats: dict = field(default_factory=dict)

    def all_units(self) -> list[ViewUnit]:
        return self.infobox + self.tables + self.sentences

    def find(self, view: ViewKind, locator: dict) -> ViewUnit | None:
        pool = {ViewKind.SENTENCE: self.sentences, ViewKind.INFOBOX_FIELD: self.infobox,
                ViewKind.TABLE_CELL: self.tables}[view]
        key = locator_key(view, locator)
        for u in pool:
            if u.key == key:
                return u
        return None


def build_page_views(wikitext: str, pack: LanguagePack, infobox_allowlist) -> PageViews:
    try:
        code = parse_wikitext(wikitext)
        stats: dict[str, Any] = {}
        sv = build_sentence_view(wikitext, pack, code=code)
        ib = build_template_view(wikitext, infobox_allowlist, pack, code=code)
        tb = build_table_view(wikitext, pack, code=code, stats=stats)
    except (ParseDegenerate, RecursionError) as exc:
        return PageViews([], [], [], degenerate=str(exc) or type(exc).__name__)
    return PageViews(sv.units, ib, tb, sv.stream, stats=stats)
