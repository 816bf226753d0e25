"""End-to-end build: ingest -> views -> statements -> grounding -> synsets -> relations -> release."""
from __future__ import annotations

import json
import logging
import os
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from . import TOOL_VERSION
from .canon import canon_serialize, jsonl_line, sha256_hex
from .grounding import (
    FactSense,
    LanguageIndex,
    PageContext,
    SchemaMap,
    UngroundedReason,
    ground_statement,
    resolve_subject_page,
)
from .ingest import (
    LinkTables,
    MissingInput,
    RawEntityRecord,
    build_manifest,
    read_disambiguation,
    read_entity_dump,
    read_page_dump,
    read_redirects_tsv,
    write_manifest,
)
from .model import FactStatement, qid_sort_key
from .policy import DEFAULT_POLICY, NormalizationPolicy
from .relations import PropertyRelationMap, derive_all
from .release import DEFAULT_SHARDS, ShardPlan, write_family
from .statements import extract_statements
from .synsets import attach_mentions, build_synsets
from .views import LanguagePack, build_page_views

log = logging.getLogger(__name__)

# keys that never influence output bytes
_VOLATILE_KEYS = ("output", "jobs")


def data_path(*parts: str) -> Path:
    return Path(str(resources.files("factforge").joinpath("data", *parts)))


def load_pack(language: str, path: str | Path | None = None) -> LanguagePack:
    return LanguagePack.load(path or data_path("packs", f"{language}.json"))


class ConfigError(ValueError):
    pass


@dataclass
class BuildConfig:
    path: Path
    raw: dict
    languages: list[str]
    entities: str
    pages: dict[str, str]
    redirects: dict[str, str] = field(default_factory=dict)
    disambiguation: dict[str, str] = field(default_factory=dict)
    packs: dict[str, str] = field(default_factory=dict)
    policy: str | None = None
    schema_map: str | None = None
    relation_map: str | None = None
    snapshot: str = ""
    fallback_title_match: bool = False
    shards: dict[str, int] = field(default_factory=dict)
    hop_cap: int = 2
    relation_tiers: list[str] | None = None
    hub_prior: bool = False
    output: str = "out"
    bench: dict = field(default_factory=dict)

    @property
    def base(self) -> Path:
        return self.path.parent

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base / p

    def body(self) -> dict:
        return {k: v for k, v in self.raw.items() if k not in _VOLATILE_KEYS}

    @classmethod
    def load(cls, path: str | Path) -> "BuildConfig":
        path = Path(path)
        if not path.exists():
            raise MissingInput(str(path))
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        try:
            inputs = raw["inputs"]
            return cls(
                path=path.resolve(),
                raw=raw,
                languages=list(raw["languages"]),
                entities=inputs["entities"],
                pages=dict(inputs["pages"]),
                redirects=dict(inputs.get("redirects", {})),
                disambiguation=dict(inputs.get("disambiguation", {})),
                packs=dict(raw.get("packs", {})),
                policy=raw.get("policy"),
                schema_map=raw.get("schema_map"),
                relation_map=raw.get("relation_map"),
                snapshot=raw.get("snapshot", ""),
                fallback_title_match=bool(raw.get("fallback_title_match", False)),
                shards={**DEFAULT_SHARDS, **raw.get("shards", {})},
                hop_cap=int(raw.get("hop_cap", 2)),
                relation_tiers=raw.get("relation_tiers"),
                hub_prior=bool(raw.get("hub_prior", False)),
                output=raw.get("output", "out"),
                bench=dict(raw.get("bench", {})),
            )
        except KeyError as exc:
            raise ConfigError(f"config missing key {exc}") from exc

    def input_files(self) -> list[tuple[str, Path]]:
        rows = [("entities", self.entities)]
        for lang in sorted(self.pages):
            rows.append((f"pages.{lang}", self.pages[lang]))
        for lang in sorted(self.redirects):
            rows.append((f"redirects.{lang}", self.redirects[lang]))
        for lang in sorted(self.disambiguation):
            rows.append((f"disambiguation.{lang}", self.disambiguation[lang]))
        return [(rel, self.resolve(rel)) for _, rel in rows]


@dataclass
class Resources:
    packs: dict[str, LanguagePack]
    policy: NormalizationPolicy
    schema_map: SchemaMap
    relation_map: PropertyRelationMap
    resource_hashes: dict[str, str]

    def allowlist(self, lang: str) -> list[str]:
        return self.schema_map.templates(lang)


def _file_hash(p: Path) -> str:
    return sha256_hex(p.read_bytes())


SHIPPED_POLICIES = ("default", "relaxed")


def load_resources(cfg: BuildConfig) -> Resources:
    packs = {}
    for lang in cfg.languages:
        packs[lang] = load_pack(lang, cfg.resolve(cfg.packs[lang]) if lang in cfg.packs else None)
    if cfg.policy in SHIPPED_POLICIES:
        policy = NormalizationPolicy.load(data_path(f"policy_{cfg.policy}.json"))
    else:
        policy = NormalizationPolicy.load(cfg.resolve(cfg.policy)) if cfg.policy else DEFAULT_POLICY
    sm_path = cfg.resolve(cfg.schema_map) if cfg.schema_map else data_path("schema_map.tsv")
    rm_path = cfg.resolve(cfg.relation_map) if cfg.relation_map else data_path("relation_map.json")
    for p in (sm_path, rm_path):
        if not p.exists():
            raise MissingInput(str(p))
    hashes = {"schema_map": _file_hash(sm_path), "relation_map": _file_hash(rm_path),
              "realizers": _file_hash(data_path("realizers.json"))}
    return Resources(packs, policy, SchemaMap.load(sm_path), PropertyRelationMap.load(rm_path), hashes)


@dataclass
class BuildState:
    """Everything a build computes in memory; bench generation reads from here."""
    cfg: BuildConfig
    res: Resources
    manifest: Any
    build_id: str
    entities: dict[str, RawEntityRecord]
    statements: list[FactStatement]
    indexes: dict[str, LanguageIndex]
    contexts: dict[tuple[str, int], PageContext]
    senses: list[FactSense]
    ungrounded: list[UngroundedReason]
    synsets: list
    edges: list
    events: list[dict]


def _views_worker(args):
    wikitext, pack_rec, allowlist = args
    return build_page_views(wikitext, LanguagePack.from_record(pack_rec), allowlist)


def _page_index(cfg: BuildConfig, res: Resources, lang: str, entities, labels, events) -> LanguageIndex:
    pages = []
    for p in read_page_dump(cfg.resolve(cfg.pages[lang])):
        pages.append(p)
    links = LinkTables()
    if lang in cfg.redirects:
        links.redirects = read_redirects_tsv(cfg.resolve(cfg.redirects[lang]))
    if lang in cfg.disambiguation:
        links.disambiguation_pages = read_disambiguation(cfg.resolve(cfg.disambiguation[lang]))
    sitelinks = {}
    for qid in sorted(entities, key=qid_sort_key):
        title = entities[qid].sitelinks.get(lang)
        if title:
            sitelinks[title] = qid
    idx = LanguageIndex.build(lang, res.packs[lang], pages, links, sitelinks, labels)
    events.append({"event": "pages_loaded", "language": lang, "count": len(pages)})
    return idx


def _labels(entities: dict[str, RawEntityRecord], lang: str) -> dict[str, list[str]]:
    out = {}
    for qid, e in entities.items():
        names = []
        if lang in e.labels:
            names.append(e.labels[lang])
        names.extend(e.aliases.get(lang, []))
        if names:
            out[qid] = names
    return out


def compute(cfg: BuildConfig, jobs: int = 1) -> BuildState:
    res = load_resources(cfg)
    inputs = [(rel, path, cfg.snapshot) for rel, path in cfg.input_files()]
    manifest = build_manifest(inputs, res.policy, res.packs, cfg.body(), TOOL_VERSION, res.resource_hashes)
    build_id = manifest.build_id
    events: list[dict] = []

    reader = read_entity_dump(cfg.resolve(cfg.entities))
    entities: dict[str, RawEntityRecord] = {}
    for rec in reader:
        if rec.entity_id in entities:
            events.append({"event": "entity_duplicate", "entity": rec.entity_id})
            continue
        entities[rec.entity_id] = rec
    for sk in reader.skipped:
        events.append({"event": "entity_line_skipped", "line": sk.line_no, "offset": sk.offset, "reason": sk.reason})

    statements: list[FactStatement] = []
    by_subject: dict[str, list[FactStatement]] = {}
    seen_ids: set[str] = set()
    for qid in sorted(entities, key=qid_sort_key):
        skipped: list = []
        fs = []
        for f in extract_statements(entities[qid], res.policy, skipped):
            if f.statement_id in seen_ids:
                events.append({"event": "statement_duplicate_id", "statement_id": f.statement_id})
                continue
            seen_ids.add(f.statement_id)
            fs.append(f)
        for s in skipped:
            events.append({"event": "claim_skipped", **s.to_record()})
        statements.extend(fs)
        by_subject[qid] = fs

    indexes = {lang: _page_index(cfg, res, lang, entities, _labels(entities, lang), events)
               for lang in cfg.languages}

    # resolve subject pages first so view construction can run in parallel
    plan: list[tuple[str, str, Any]] = []
    needed: dict[tuple[str, int], Any] = {}
    for qid in sorted(entities, key=qid_sort_key):
        e = entities[qid]
        for lang in cfg.languages:
            if lang not in e.sitelinks and not cfg.fallback_title_match:
                continue
            r = resolve_subject_page(qid, lang, e.sitelinks, indexes[lang], cfg.fallback_title_match,
                                     e.labels.get(lang))
            if r.page is None and lang not in e.sitelinks:
                continue
            plan.append((qid, lang, r))
            if r.page is not None:
                needed[(lang, r.page.page_id)] = r.page
            else:
                events.append({"event": "page_unresolved", "entity": qid, "language": lang, "detail": r.detail})

    keys = sorted(needed)
    if jobs > 1 and len(keys) > 1:
        args = [(needed[k].wikitext, res.packs[k[0]].content(), res.allowlist(k[0])) for k in keys]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            built = list(ex.map(_views_worker, args, chunksize=8))
    else:
        built = [build_page_views(needed[k].wikitext, res.packs[k[0]], res.allowlist(k[0])) for k in keys]
    contexts = {k: PageContext(needed[k], v, indexes[k[0]]) for k, v in zip(keys, built)}
    for k in keys:
        pv = contexts[k].views
        if pv.degenerate:
            events.append({"event": "parse_degenerate", "language": k[0], "page_id": k[1], "detail": pv.degenerate})
        if pv.stats.get("tables_malformed"):
            events.append({"event": "tables_malformed", "language": k[0], "page_id": k[1],
                           "count": pv.stats["tables_malformed"]})

    senses: list[FactSense] = []
    ungrounded: list[UngroundedReason] = []
    for qid, lang, r in plan:
        ctx = contexts.get((lang, r.page.page_id)) if r.page is not None else None
        for f in by_subject[qid]:
            out = ground_statement(f, ctx, res.schema_map, build_id, TOOL_VERSION, res.policy, lang,
                                   r.detail, r.c_resolve)
            senses.extend(out.senses)
            if out.reason is not None:
                ungrounded.append(out.reason)

    synsets = build_synsets(statements, build_id, res.policy)
    stmt_to_syn = {m: y.synset_id for y in synsets for m in y.members}
    attach_mentions(synsets, senses, stmt_to_syn)
    tiers = set(cfg.relation_tiers) if cfg.relation_tiers is not None else None
    edges = derive_all(synsets, res.relation_map, build_id, cfg.hop_cap, tiers, cfg.hub_prior)
    for idx in indexes.values():
        for title in idx.links.cycles:
            events.append({"event": "redirect_cycle", "language": idx.language, "title": title})
    return BuildState(cfg, res, manifest, build_id, entities, statements, indexes, contexts, senses, ungrounded,
                      synsets, edges, events)


def family_records(state: BuildState) -> dict[str, list[dict]]:
    stmt_to_syn = {m: y.synset_id for y in state.synsets for m in y.members}
    stmts = []
    for f in state.statements:
        r = f.to_record()
        r["synset_id"] = stmt_to_syn[f.statement_id]
        r["aggregation_key"] = f.aggregation_key
        r["merge_reasons"] = [m.to_record() for m in f.merge_reasons]
        stmts.append(r)
    return {
        "statements": stmts,
        "factsenses": [s.to_record() for s in state.senses],
        "factsenses_text": [s.text_record() for s in state.senses],
        "synsets": [y.to_record() for y in state.synsets],
        "relations": [e.to_record() for e in state.edges],
        "ungrounded": [u.to_record() for u in state.ungrounded],
    }


def _clean_out(out_dir: Path) -> None:
    for fam in DEFAULT_SHARDS:
        shutil.rmtree(out_dir / fam, ignore_errors=True)
    for name in ("bench", "logs"):
        shutil.rmtree(out_dir / name, ignore_errors=True)
    (out_dir / "manifest.json").unlink(missing_ok=True)


def write_release(state: BuildState, out_dir: Path, bench: bool = False) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    _clean_out(out_dir)
    fams = family_records(state)
    shards = {}
    for fam in sorted(fams):
        plan = ShardPlan(fam, int(state.cfg.shards[fam]))
        shards[fam] = {"plan": plan.to_record(), "files": write_family(out_dir, fams[fam], plan)}
    (out_dir / "logs").mkdir(parents=True, exist_ok=True)
    log_bytes = b"".join(jsonl_line(e) for e in state.events)
    (out_dir / "logs" / "events.jsonl").write_bytes(log_bytes)
    record = {**state.manifest.to_record(), "shards": shards,
              "logs": {"events.jsonl": sha256_hex(log_bytes)},
              "counts": {fam: len(recs) for fam, recs in sorted(fams.items())}}
    if bench:
        from .bench.build import build_bench
        record["bench"] = build_bench(state, out_dir / "bench")
    write_manifest(record, out_dir / "manifest.json")
    return record


@dataclass
class BuildResult:
    status: int
    manifest: dict | None
    out_dir: Path | None
    error: str = ""
    seconds: float = 0.0


def output_dir(cfg: BuildConfig, override: str | Path | None = None) -> Path:
    if override is not None:
        return Path(override)
    env = os.environ.get("FACTFORGE_OUT")
    if env:
        return Path(env)
    return cfg.resolve(cfg.output)


def run_build(config_path: str | Path, out: str | Path | None = None, jobs: int = 1, bench: bool = False) -> BuildResult:
    t0 = time.perf_counter()
    try:
        cfg = BuildConfig.load(config_path)
        state = compute(cfg, jobs)
        out_dir = output_dir(cfg, out)
        record = write_release(state, out_dir, bench)
    except MissingInput as exc:
        log.error("missing input: %s", exc)
        return BuildResult(2, None, None, f"MissingInput: {exc}", time.perf_counter() - t0)
    except Exception as exc:  # any aborting stage error maps to a nonzero exit
        log.exception("build failed")
        return BuildResult(1, None, None, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0)
    return BuildResult(0, record, out_dir, "", time.perf_counter() - t0)


def config_hash(cfg: BuildConfig) -> str:
    return sha256_hex(canon_serialize(cfg.body()))
