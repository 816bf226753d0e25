"""Corpus diagnostics computed from released shards only."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .release import read_family

STAGES = ("sitelink", "page_retrieval", "unit_construction", "matching")
SIZE_BUCKETS = ("1", "2", "3-5", ">=6")


class EmptyCorpus(ValueError):
    pass


@dataclass
class Concentration:
    shares: dict[str, float]
    gini: float
    entropy: float
    n_eff: float


def compute_concentration(counts: Mapping[str, int | float]) -> Concentration:
    """Gini (mean-absolute-difference form), Shannon entropy in nats, and exp(H)."""
    if any(c < 0 for c in counts.values()):
        raise ValueError("counts must be nonnegative")
    total = math.fsum(counts.values())
    if total <= 0:
        raise EmptyCorpus("no senses in any language")
    keys = sorted(counts)
    p = [counts[k] / total for k in keys]
    k = len(p)
    gini = math.fsum(abs(a - b) for a in p for b in p) / (2 * k)
    h = -math.fsum(x * math.log(x) for x in p if x > 0)
    return Concentration(dict(zip(keys, p)), gini, h, math.exp(h))


@dataclass
class FunnelStage:
    stage: str
    entered: int
    retained: int

    @property
    def retention(self) -> float:
        return self.retained / self.entered if self.entered else 1.0


@dataclass
class Funnel:
    per_language: dict[str, list[FunnelStage]]
    macro: dict[str, float]
    micro: dict[str, float]


# where a candidate (statement, language) stopped; None means it produced a sense
_STOP = {"sitelink": 0, "page_retrieval": 1, "unit_construction": 2, "matching": 3}


def compute_funnel(outcomes: Mapping[str, Iterable[str | None]]) -> Funnel:
    """``outcomes[lang]`` lists, per candidate fact, the stage it failed at (or None if grounded).

    Each stage's retention is conditional on reaching it; macro is the
    unweighted mean over languages, micro pools candidates.
    """
    per = {}
    for lang in sorted(outcomes):
        stops = list(outcomes[lang])
        rows = []
        alive = len(stops)
        for st in STAGES:
            lost = sum(1 for s in stops if s == st)
            rows.append(FunnelStage(st, alive, alive - lost))
            alive -= lost
        per[lang] = rows
    macro, micro = {}, {}
    for i, st in enumerate(STAGES):
        rs = [rows[i].retention for rows in per.values()]
        macro[st] = math.fsum(rs) / len(rs) if rs else 1.0
        ent = sum(rows[i].entered for rows in per.values())
        ret = sum(rows[i].retained for rows in per.values())
        micro[st] = ret / ent if ent else 1.0
    return Funnel(per, macro, micro)


def size_bucket(n: int) -> str:
    if n <= 1:
        return "1"
    if n == 2:
        return "2"
    if n <= 5:
        return "3-5"
    return ">=6"


@dataclass
class DiagnosticsReport:
    sense_counts: dict[str, int]
    concentration: Concentration | None
    funnel: Funnel
    synset_sizes: dict[str, int]
    ungrounded: dict[str, dict[str, int]]
    extras: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        c = self.concentration
        return {
            "sense_counts": self.sense_counts,
            "shares": c.shares if c else {},
            "gini": c.gini if c else None,
            "entropy": c.entropy if c else None,
            "n_eff": c.n_eff if c else None,
            "funnel": {
                "per_language": {l: {s.stage: {"entered": s.entered, "retained": s.retained,
                                                "retention": s.retention} for s in rows}
                                 for l, rows in self.funnel.per_language.items()},
                "macro": self.funnel.macro,
                "micro": self.funnel.micro,
            },
            "synset_sizes": self.synset_sizes,
            "ungrounded": self.ungrounded,
        }


def stats_from_release(out_dir: str | Path, languages: Iterable[str] | None = None) -> DiagnosticsReport:
    """Recompute diagnostics from the structural shards.

    Candidates are (statement, language) pairs for every statement and
    language; a candidate without a sitelink in that language fails the
    sitelink stage.
    """
    statements = list(read_family(out_dir, "statements"))
    senses = list(read_family(out_dir, "factsenses"))
    ungrounded = list(read_family(out_dir, "ungrounded"))
    synsets = list(read_family(out_dir, "synsets"))
    langs = sorted(set(languages) if languages is not None else
                   {s["language"] for s in senses} | {u["language"] for u in ungrounded})
    sense_counts = Counter(s["language"] for s in senses)
    grounded = {(s["statement_id"], s["language"]) for s in senses}
    reason = {(u["statement_id"], u["language"]): u for u in ungrounded}
    outcomes: dict[str, list[str | None]] = {l: [] for l in langs}
    for st in statements:
        for l in langs:
            key = (st["statement_id"], l)
            if key in grounded:
                outcomes[l].append(None)
            elif key in reason:
                outcomes[l].append(reason[key]["stage"])
            else:
                outcomes[l].append("sitelink")
    counts = {l: sense_counts.get(l, 0) for l in langs}
    try:
        conc = compute_concentration(counts)
    except EmptyCorpus:
        conc = None
    sizes = Counter(size_bucket(len(y["members"])) for y in synsets)
    ung: dict[str, dict[str, int]] = {}
    for u in ungrounded:
        d = ung.setdefault(u["language"], {})
        d[u["code"]] = d.get(u["code"], 0) + 1
    return DiagnosticsReport(
        counts, conc, compute_funnel(outcomes),
        {b: sizes.get(b, 0) for b in SIZE_BUCKETS},
        {l: dict(sorted(v.items())) for l, v in sorted(ung.items())},
    )


def slice_concentration(out_dir: str | Path, slicer: Callable[[dict], str | None]) -> dict[str, Concentration]:
    """Per-slice language concentration.

    ``slicer`` maps a structural sense record to a slice label, or None to
    leave it out. No type ontology ships with the package; callers bring
    their own rules (topic, geography and so on).
    """
    by_slice: dict[str, Counter] = {}
    for s in read_family(out_dir, "factsenses"):
        label = slicer(s)
        if label is None:
            continue
        by_slice.setdefault(label, Counter())[s["language"]] += 1
    return {k: compute_concentration(dict(v)) for k, v in sorted(by_slice.items())}
