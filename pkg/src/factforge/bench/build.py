"""Write all benchmark artifacts for a computed build."""
from __future__ import annotations

import hashlib
from pathlib import Path

from ..canon import jsonl_line
from ..model import qid_sort_key
from ..relations import CONFLICT
from .descriptions import aligned_splits, build_entity_description, mask_predicate
from .kgc import project_kgc, write_tsv
from .mfc import ExactValueIndex, GenerationStarved, MfcInputs, generate_mfc_claims
from .mkqa import KGraph, generate_mkqa
from .realize import load_realizers
from .splits import assign_split


def _put(root: Path, rel: str, data: bytes, entries: dict) -> None:
    p = root / rel
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(data)
    entries[rel] = hashlib.sha256(data).hexdigest()


def _jsonl(rows) -> bytes:
    return b"".join(jsonl_line(r) for r in rows)


def entity_labels(entities) -> dict[str, dict[str, str]]:
    return {q: dict(e.labels) for q, e in entities.items()}


def build_bench(state, out_dir: Path) -> dict:
    """Splits, KGC files and descriptions, MKQA questions and MFC claims; returns {path: sha256}."""
    cfg = state.cfg.bench
    out_dir = Path(out_dir)
    entries: dict[str, str] = {}
    build_id = state.build_id
    synsets = state.synsets
    split_rows = [assign_split(y.synset_id, build_id) for y in synsets]
    splits = {a.synset_id: a.split for a in split_rows}
    _put(out_dir, "splits.tsv",
         "".join(f"{a.synset_id}\t{a.split.value}\t{a.h}\n" for a in split_rows).encode("utf-8"), entries)

    # KGC
    proj = project_kgc(synsets, splits, int(cfg.get("vocab_size", 320)))
    for name, triples in proj.by_split().items():
        (out_dir / "kgc").mkdir(parents=True, exist_ok=True)
        entries[f"kgc/{name}.tsv"] = hashlib.sha256(write_tsv(out_dir / "kgc" / f"{name}.tsv", triples)).hexdigest()
    entries["kgc/all_true.tsv"] = hashlib.sha256(write_tsv(out_dir / "kgc" / "all_true.tsv", proj.all_true)).hexdigest()
    _put(out_dir, "kgc/collisions.jsonl",
         _jsonl({"key": list(k), "kept_in": res} for k, res in proj.collisions), entries)

    prop_of = {y.synset_id: y.property for y in synsets}
    subject_of = {y.synset_id: y.subject for y in synsets}
    unit_splits = aligned_splits(state.senses, splits)
    by_entity: dict[tuple[str, str], list] = {}
    for s in state.senses:
        by_entity.setdefault((subject_of[s.synset_id], s.language), []).append(s)
    desc_rows = []
    for (ent, lang) in sorted(by_entity, key=lambda k: (qid_sort_key(k[0]), k[1])):
        d = build_entity_description(ent, by_entity[(ent, lang)], splits, prop_of, unit_splits)
        if not d.segments:
            continue
        props = sorted({p for seg in d.segments for p, _, _ in seg.spans})
        desc_rows.append({"entity": ent, "language": lang, "text": d.text,
                          "masked": {p: mask_predicate(d, p) for p in props},
                          "units": [[b.decode("utf-8") for b in seg.key] for seg in d.segments]})
    _put(out_dir, "kgc/descriptions.jsonl", _jsonl(desc_rows), entries)

    # MKQA
    realizers = load_realizers()
    graph = KGraph.from_synsets(synsets)
    labels = entity_labels(state.entities)
    sp_split: dict[str, str] = {}
    for y in sorted(synsets, key=lambda y: y.synset_id):
        sp_split.setdefault(f"{y.subject}|{y.property}", splits[y.synset_id].value)
    for lang in state.cfg.languages:
        rows = generate_mkqa(graph, labels, realizers["property_labels"].get(lang, {}),
                             realizers["questions"][lang], lang, sp_split)
        _put(out_dir, f"mkqa/{lang}.jsonl", _jsonl(rows), entries)

    # MFC
    conflicts = [e for e in state.edges if e.relation_type == CONFLICT]
    indexes = {}
    for lang in state.cfg.languages:
        units = {}
        for (l, pid), ctx in state.contexts.items():
            if l == lang:
                units[pid] = [u.text for u in ctx.views.all_units()]
        indexes[lang] = ExactValueIndex(state.res.packs[lang], units)
    inp = MfcInputs(synsets, {s.factsense_id: s for s in state.senses}, labels, splits, conflicts,
                    set(state.res.relation_map.functional_properties), state.res.packs, indexes)
    report = {}
    for lang in state.cfg.languages:
        n = cfg.get("mfc_claims", {}).get(lang) if isinstance(cfg.get("mfc_claims"), dict) else None
        try:
            claims = generate_mfc_claims(inp, lang, build_id, n)
        except GenerationStarved as exc:
            report[lang] = {"starved": str(exc)}
            claims = []
        counts = {}
        for c in claims:
            counts[c.label] = counts.get(c.label, 0) + 1
        report.setdefault(lang, {})["counts"] = dict(sorted(counts.items()))
        _put(out_dir, f"mfc/{lang}.jsonl", _jsonl(c.to_record() for c in claims), entries)
    _put(out_dir, "mfc/report.json", jsonl_line(report), entries)
    return dict(sorted(entries.items()))
