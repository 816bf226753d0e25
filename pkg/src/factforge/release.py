"""Sharded canonical JSONL output, manifests, and pointer re-localization."""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable

from . import _kernels
from .canon import canon_parse, jsonl_line
from .grounding import EvidencePointer
from .ingest import RawPage
from .views import LanguagePack, PageViews, build_page_views, loose_text

SHARD_SEED = 0x9E3779B97F4A7C15
_SEEDED_BASIS = _kernels.fnv1a64(SHARD_SEED.to_bytes(8, "big"))

# family -> primary id field
FAMILIES = {
    "statements": "statement_id",
    "factsenses": "factsense_id",
    "factsenses_text": "factsense_id",
    "synsets": "synset_id",
    "relations": "relation_id",
    "ungrounded": "id",
}
STRUCTURAL = ("statements", "factsenses", "synsets", "relations", "ungrounded")
EVIDENCE = ("factsenses_text",)
DEFAULT_SHARDS = {"statements": 8, "factsenses": 8, "factsenses_text": 8, "synsets": 8, "relations": 4,
                  "ungrounded": 4}


class ShardWriteError(IOError):
    pass


@dataclass(frozen=True)
class ShardPlan:
    family: str
    n: int
    seed: int = SHARD_SEED

    def to_record(self) -> dict:
        return {"family": self.family, "n": self.n, "seed": f"{self.seed:#018x}", "hash": "fnv1a64"}


def shard_hash(record_id: str) -> int:
    return _kernels.fnv1a64(record_id.encode("utf-8"), _SEEDED_BASIS)


def assign_shard(record_id: str, plan: ShardPlan) -> int:
    if not record_id:
        raise ValueError("record id must be nonempty")
    return shard_hash(record_id) % plan.n


def assign_shards(ids: list[str], plan: ShardPlan, use_numba: bool | None = None):
    """Vectorized :func:`assign_shard`."""
    buf, offsets = _kernels.pack_strings(ids)
    h0 = _SEEDED_BASIS if plan.seed == SHARD_SEED else _kernels.fnv1a64(plan.seed.to_bytes(8, "big"))
    return _kernels.fnv_batch(buf, offsets, h0, use_numba) % plan.n


def write_family(out_dir: str | Path, records: Iterable[dict], plan: ShardPlan) -> list[dict]:
    """Write all N shards (empty ones included), each sorted by id; returns per-shard entries."""
    id_field = FAMILIES[plan.family]
    recs = list(records)
    ids = [r[id_field] for r in recs]
    if len(set(ids)) != len(ids):
        raise ShardWriteError(f"{plan.family}: duplicate ids")
    shards: list[list[tuple[str, dict]]] = [[] for _ in range(plan.n)]
    if recs:
        for rid, r, s in zip(ids, recs, assign_shards(ids, plan)):
            shards[int(s)].append((rid, r))
    fam_dir = Path(out_dir) / plan.family
    entries = []
    try:
        fam_dir.mkdir(parents=True, exist_ok=True)
        for i, rows in enumerate(shards):
            rows.sort(key=lambda t: t[0])
            data = b"".join(jsonl_line(r) for _, r in rows)
            path = fam_dir / f"shard-{i:05d}.jsonl"
            tmp = path.with_suffix(".jsonl.tmp")
            with open(tmp, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
            entries.append({"path": f"{plan.family}/{path.name}", "records": len(rows),
                            "sha256": hashlib.sha256(data).hexdigest()})
    except OSError as exc:
        raise ShardWriteError(f"{plan.family}: {exc}") from exc
    return entries


def read_family(out_dir: str | Path, family: str) -> Iterable[dict]:
    fam_dir = Path(out_dir) / family
    for path in sorted(fam_dir.glob("shard-*.jsonl")):
        with open(path, "rb") as fh:
            for line in fh:
                if line.strip():
                    yield canon_parse(line)


# ------------------------------------------------------------ re-localization


class Relocalization(str, Enum):
    EXACT = "Exact"
    DRIFT = "Drift"
    FAIL = "Fail"


@dataclass
class RelocalizationOutcome:
    cls: Relocalization
    detail: str = ""
    span: str | None = None


PageLookup = Callable[[str, int], RawPage | None]


class ViewCache:
    def __init__(self, packs: dict[str, LanguagePack], allowlists: dict[str, list[str]]):
        self.packs = packs
        self.allowlists = allowlists
        self._cache: dict[tuple[str, int, int], PageViews] = {}

    def get(self, language: str, page: RawPage) -> PageViews:
        key = (language, page.page_id, page.revision_id)
        v = self._cache.get(key)
        if v is None:
            v = build_page_views(page.wikitext, self.packs[language], self.allowlists.get(language, []))
            self._cache[key] = v
        return v


def relocate_pointer(pointer: EvidencePointer, pages: PageLookup, views: ViewCache) -> RelocalizationOutcome:
    """Regenerate the span from the dumps and classify it against the recorded fingerprints."""
    lang = pointer.language
    if lang not in views.packs:
        return RelocalizationOutcome(Relocalization.FAIL, f"no language pack for {lang}")
    page = pages(lang, pointer.page_id)
    if page is None:
        return RelocalizationOutcome(Relocalization.FAIL, f"page {pointer.page_id} missing")
    if page.revision_id != pointer.revision_id:
        return RelocalizationOutcome(Relocalization.FAIL,
                                     f"revision {pointer.revision_id} missing (found {page.revision_id})")
    pv = views.get(lang, page)
    unit = pv.find(pointer.view, pointer.locator)
    if unit is None:
        return RelocalizationOutcome(Relocalization.FAIL, f"unit {pointer.view.value} {pointer.locator} not found")
    if unit.norm_id != pointer.norm_id:
        return RelocalizationOutcome(Relocalization.FAIL, f"norm_id mismatch {unit.norm_id} != {pointer.norm_id}")
    if not 0 <= pointer.start <= pointer.end <= len(unit.text):
        return RelocalizationOutcome(Relocalization.FAIL,
                                     f"span [{pointer.start},{pointer.end}) outside unit of length {len(unit.text)}")
    span = unit.text[pointer.start:pointer.end]
    if hashlib.sha256(unit.text.encode("utf-8")).hexdigest() == pointer.unit_sha256:
        return RelocalizationOutcome(Relocalization.EXACT, "", span)
    if hashlib.sha256(loose_text(unit.text).encode("utf-8")).hexdigest() == pointer.unit_loose_sha256:
        return RelocalizationOutcome(Relocalization.DRIFT, "equal after whitespace/control normalization", span)
    return RelocalizationOutcome(Relocalization.FAIL, "unit text changed", span)
