"""Command line entry point: build, validate, stats, bench and hashing helpers."""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from collections import Counter
from pathlib import Path

from .canon import canon_serialize
from .ingest import MissingInput, XmlMalformed, read_page_dump

log = logging.getLogger("factforge")


def _print(obj) -> None:
    sys.stdout.write(canon_serialize(obj).decode("utf-8") + "\n")


def cmd_build(args) -> int:
    from .pipeline import run_build

    res = run_build(args.config, args.out, args.jobs, args.bench)
    if res.status != 0:
        print(f"build failed: {res.error}", file=sys.stderr)
        return res.status
    _print({"build_id": res.manifest["build_id"], "out": str(res.out_dir), "counts": res.manifest["counts"],
            "seconds": round(res.seconds, 3)})
    return 0


def load_pages(path) -> dict[int, object]:
    """Pages by id; a truncated dump keeps whatever parsed before the damage."""
    pages = {}
    try:
        for p in read_page_dump(path):
            pages[p.page_id] = p
    except XmlMalformed as exc:
        log.warning("page dump %s is malformed (%s); using %d pages read so far", path, exc, len(pages))
    return pages


def validate_pointers(config: str | Path, release: str | Path | None = None, sample: int | None = None,
                      pages_override: dict[str, str] | None = None) -> dict:
    from .grounding import EvidencePointer
    from .pipeline import BuildConfig, load_resources, output_dir
    from .release import ViewCache, read_family, relocate_pointer

    cfg = BuildConfig.load(config)
    res = load_resources(cfg)
    release = Path(release) if release else output_dir(cfg)
    pages = {}
    for lang in cfg.languages:
        src = (pages_override or {}).get(lang) or cfg.resolve(cfg.pages[lang])
        pages[lang] = load_pages(src)
    views = ViewCache(res.packs, {l: res.allowlist(l) for l in cfg.languages})
    senses = sorted(read_family(release, "factsenses"), key=lambda r: r["factsense_id"])
    if sample is not None and sample < len(senses):
        senses = sorted(senses, key=lambda r: hashlib.sha1(r["factsense_id"].encode()).hexdigest())[:sample]
    tally: Counter = Counter()
    fails = []
    for r in senses:
        ptr = EvidencePointer.from_record(r["pointer"])
        out = relocate_pointer(ptr, lambda l, pid: pages.get(l, {}).get(pid), views)
        tally[out.cls.value] += 1
        if out.cls.value != "Exact":
            fails.append({"factsense_id": r["factsense_id"], "class": out.cls.value, "detail": out.detail})
    return {"checked": len(senses), "classes": {k: tally.get(k, 0) for k in ("Exact", "Drift", "Fail")},
            "non_exact": fails}


def cmd_validate(args) -> int:
    overrides = dict(kv.split("=", 1) for kv in args.pages or [])
    rep = validate_pointers(args.config, args.release, args.sample, overrides)
    if not args.verbose:
        rep = {**rep, "non_exact": rep["non_exact"][:20]}
    _print(rep)
    return 0 if rep["classes"]["Fail"] == 0 else 1


def cmd_stats(args) -> int:
    from .diag import stats_from_release

    rep = stats_from_release(args.release, args.languages)
    sys.stdout.write(json.dumps(rep.to_record(), indent=1, sort_keys=True, ensure_ascii=False) + "\n")
    return 0


def cmd_bench_build(args) -> int:
    from .pipeline import run_build

    res = run_build(args.config, args.out, args.jobs, bench=True)
    if res.status != 0:
        print(f"build failed: {res.error}", file=sys.stderr)
        return res.status
    _print({"build_id": res.manifest["build_id"], "bench": res.manifest.get("bench", {})})
    return 0


def _read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _synsets(release):
    from .release import read_family
    from .synsets import FactSynset

    return [FactSynset.from_record(r) for r in read_family(release, "synsets")]


def cmd_bench_eval(args) -> int:
    bench = Path(args.release) / "bench"
    if args.task == "kgc":
        from .bench.kgc import filtered_rank, read_tsv

        scores: dict[tuple[str, str, str], float] = {}
        with open(args.predictions, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    s, p, o, v = line.rstrip("\n").split("\t")
                    scores[(s, p, o)] = float(v)
        test = read_tsv(bench / "kgc" / f"{args.split}.tsv")
        true = read_tsv(bench / "kgc" / "all_true.tsv")
        m = filtered_rank(lambda s, p, o: scores.get((s, p, o), float("-inf")), test, true)
        _print({"task": "kgc", "split": args.split, "n": m.n, "mrr": repr(m.mrr), "hits10": repr(m.hits10)})
    elif args.task == "mkqa":
        from .bench.mkqa import KGraph, evaluate_mkqa

        g = KGraph.from_synsets(_synsets(args.release))
        inst = [r for r in _read_jsonl(bench / "mkqa" / f"{args.language}.jsonl") if r["split"] == args.split]
        preds = {r["id"]: r["lf"] for r in _read_jsonl(args.predictions)}
        rep = evaluate_mkqa(preds, inst, g)
        _print({"task": "mkqa", "n": rep.n, "macro_f1": repr(rep.macro_f1), "valid_pct": repr(rep.valid_pct)})
    else:
        from .bench.mfc import mfc_metrics

        gold = [r for r in _read_jsonl(bench / "mfc" / f"{args.language}.jsonl") if r["split"] == args.split]
        preds = {r["claim_id"]: r for r in _read_jsonl(args.predictions)}
        rep = mfc_metrics(preds, gold)
        _print({"task": "mfc", "n": rep.n, "accuracy": repr(rep.accuracy), "macro_f1": repr(rep.macro_f1),
                "recall_at_5": repr(rep.recall_at_5), "span_f1": repr(rep.span_f1)})
    return 0


def cmd_pack_hash(args) -> int:
    from .pipeline import load_pack

    target = args.pack
    pack = load_pack(target) if not Path(target).exists() else load_pack("", target)
    _print({"language": pack.language, "pack_id": pack.pack_id})
    return 0


def cmd_policy_hash(args) -> int:
    from .policy import DEFAULT_POLICY, NormalizationPolicy

    pol = NormalizationPolicy.load(args.policy) if args.policy else DEFAULT_POLICY
    _print({"label": pol.label, "version": pol.version})
    return 0


def cmd_fixture(args) -> int:
    from .fixtures import write_fixture

    paths = write_fixture(args.out, seed=args.seed)
    _print({k: str(v) for k, v in paths.items()})
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="factforge", description="Deterministic grounded fact graph builder.")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging and full reports")
    sub = ap.add_subparsers(dest="cmd", required=True)

    b = sub.add_parser("build", help="run the full build from a config file")
    b.add_argument("--config", required=True, help="build config (JSON)")
    b.add_argument("--out", help="output root (overrides config and FACTFORGE_OUT)")
    b.add_argument("--jobs", type=int, default=1, help="worker processes for view construction")
    b.add_argument("--bench", action="store_true", help="also generate splits and benchmark tasks")
    b.set_defaults(fn=cmd_build)

    v = sub.add_parser("validate-pointers", help="re-localize released evidence pointers against the dumps")
    v.add_argument("--config", required=True)
    v.add_argument("--release", help="release directory (default: the config's output root)")
    v.add_argument("--sample", type=int, help="check a deterministic sample of N senses")
    v.add_argument("--pages", action="append", metavar="LANG=PATH",
                   help="read this language's pages from another dump (repeatable)")
    v.set_defaults(fn=cmd_validate)

    s = sub.add_parser("stats", help="diagnostics recomputed from released shards")
    s.add_argument("--release", required=True)
    s.add_argument("--languages", nargs="*", help="languages to include (default: those seen in shards)")
    s.set_defaults(fn=cmd_stats)

    bn = sub.add_parser("bench", help="benchmark generation and evaluation")
    bsub = bn.add_subparsers(dest="bench_cmd", required=True)
    bb = bsub.add_parser("build", help="build with benchmark outputs")
    bb.add_argument("--config", required=True)
    bb.add_argument("--out")
    bb.add_argument("--jobs", type=int, default=1)
    bb.set_defaults(fn=cmd_bench_build)
    be = bsub.add_parser("eval", help="score predictions against a released benchmark")
    be.add_argument("task", choices=["kgc", "mkqa", "mfc"])
    be.add_argument("--release", required=True)
    be.add_argument("--predictions", required=True,
                    help="kgc: TSV s,p,o,score; mkqa: JSONL {id, lf}; mfc: JSONL {claim_id, label, evidence, spans}")
    be.add_argument("--split", default="test", choices=["train", "dev", "test", "Train", "Dev", "Test"])
    be.add_argument("--language", default="en")
    be.set_defaults(fn=cmd_bench_eval)

    pk = sub.add_parser("pack", help="language pack utilities")
    psub = pk.add_subparsers(dest="pack_cmd", required=True)
    ph = psub.add_parser("hash", help="print a pack's content hash")
    ph.add_argument("pack", help="language code of a shipped pack, or a pack JSON path")
    ph.set_defaults(fn=cmd_pack_hash)

    po = sub.add_parser("policy", help="normalization policy utilities")
    posub = po.add_subparsers(dest="policy_cmd", required=True)
    poh = posub.add_parser("hash", help="print a policy's version string")
    poh.add_argument("policy", nargs="?", help="policy JSON (default: strict policy)")
    poh.set_defaults(fn=cmd_policy_hash)

    fx = sub.add_parser("fixture", help="write the deterministic fixture dumps and config")
    fx.add_argument("--out", required=True)
    fx.add_argument("--seed", type=int, default=20240601)
    fx.set_defaults(fn=cmd_fixture)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "split", None):
        args.split = args.split.lower() if args.task == "kgc" else args.split.capitalize()
    try:
        return args.fn(args)
    except MissingInput as exc:
        print(f"MissingInput: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
