"""Train-only entity descriptions for text-augmented KGC, with predicate masking."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from ..model import VIEW_ORDER, ViewKind
from .mfc import unit_key
from .splits import Split

MASK = "[MASK]"
MAX_UNITS = 16
TOKEN_CAP = 256


@dataclass
class Segment:
    key: tuple
    view: ViewKind
    text: str
    prefix: str = ""
    # (property, start, end) value spans from Train-aligned senses on this unit
    spans: list[tuple[str, int, int]] = field(default_factory=list)

    def render(self, text: str | None = None) -> str:
        t = self.text if text is None else text
        return f"{self.prefix}: {t}" if self.prefix else t


@dataclass
class Description:
    entity: str
    segments: list[Segment]
    cap: int = TOKEN_CAP

    @property
    def text(self) -> str:
        return truncate_tokens("\n".join(s.render() for s in self.segments), self.cap)


def truncate_tokens(text: str, cap: int) -> str:
    """Keep the first ``cap`` whitespace tokens, preserving line breaks between kept tokens."""
    out_lines, used = [], 0
    for line in text.split("\n"):
        toks = line.split()
        if used >= cap:
            break
        take = toks[: cap - used]
        used += len(take)
        out_lines.append(" ".join(take))
    return "\n".join(out_lines).rstrip("\n")


def _prefix(s) -> str:
    if s.pointer.view is ViewKind.INFOBOX_FIELD:
        return str(s.pointer.locator.get("param", ""))
    return ""


def aligned_splits(senses: Iterable, splits: dict[str, Split]) -> dict[tuple, set[Split]]:
    """Unit -> set of splits of synsets with a sense on it."""
    out: dict[tuple, set[Split]] = {}
    for s in senses:
        out.setdefault(unit_key(s.pointer.to_record()), set()).add(splits[s.synset_id])
    return out


def build_entity_description(entity: str, senses: Iterable, splits: dict[str, Split], prop_of: dict[str, str],
                             unit_splits: dict[tuple, set[Split]], m: int = MAX_UNITS,
                             cap: int = TOKEN_CAP) -> Description:
    """``senses`` are the entity's senses; ``prop_of`` maps synset_id -> property."""
    by_unit: dict[tuple, list] = {}
    for s in senses:
        if splits[s.synset_id] is not Split.TRAIN:
            continue
        k = unit_key(s.pointer.to_record())
        if unit_splits.get(k, set()) - {Split.TRAIN}:
            continue  # shared with a Dev/Test synset
        by_unit.setdefault(k, []).append(s)

    def prio(k):
        ss = by_unit[k]
        best = max(ss, key=lambda s: s.confidence)
        return (VIEW_ORDER[best.pointer.view], -best.confidence, best.pointer.sort_key(), k)

    segs = []
    for k in sorted(by_unit, key=prio)[:m]:
        ss = sorted(by_unit[k], key=lambda s: s.factsense_id)
        first = ss[0]
        spans = sorted({(prop_of[s.synset_id], s.pointer.start, s.pointer.end) for s in ss})
        segs.append(Segment(k, first.pointer.view, first.unit_text, _prefix(first), spans))
    return Description(entity, segs, cap)


def mask_predicate(desc: Description, prop: str) -> str:
    """Description text with every value span of ``prop`` replaced by the sentinel."""
    lines = []
    for seg in desc.segments:
        hits = [(b, e) for p, b, e in seg.spans if p == prop]
        if not hits:
            lines.append(seg.render())
        elif seg.view is ViewKind.SENTENCE:
            text = seg.text
            merged: list[list[int]] = []
            for b, e in sorted(hits):
                if merged and b <= merged[-1][1]:
                    merged[-1][1] = max(merged[-1][1], e)
                else:
                    merged.append([b, e])
            for b, e in reversed(merged):
                text = text[:b] + MASK + text[e:]
            lines.append(seg.render(text))
        else:
            lines.append(seg.render(MASK))
    return truncate_tokens("\n".join(lines), desc.cap)
