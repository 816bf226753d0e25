import json

import pytest

from factforge.cli import build_parser, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parser_has_subcommands():
    ap = build_parser()
    for cmd in (["build", "--config", "c"], ["stats", "--release", "r"], ["validate-pointers", "--config", "c"],
                ["bench", "eval", "kgc", "--release", "r", "--predictions", "p"], ["policy", "hash"],
                ["pack", "hash", "en"], ["fixture", "--out", "x"]):
        assert ap.parse_args(cmd).fn


def test_policy_and_pack_hash(capsys):
    code, out, _ = run(capsys, "policy", "hash")
    assert code == 0 and json.loads(out)["version"].startswith("strict")
    code, out, _ = run(capsys, "pack", "hash", "de")
    assert code == 0 and json.loads(out)["language"] == "de"


def test_missing_config_exit_2(capsys, tmp_path):
    code, _, err = run(capsys, "build", "--config", str(tmp_path / "none.json"))
    assert code == 2 and "MissingInput" in err


def test_missing_input_file_exit_2(capsys, fixture_dir, tmp_path):
    cfg = json.loads((fixture_dir / "config.json").read_text())
    cfg["inputs"]["entities"] = str(tmp_path / "gone.json")
    cfg["inputs"]["pages"] = {k: str(fixture_dir / v) for k, v in cfg["inputs"]["pages"].items()}
    cfg["inputs"].pop("redirects", None)
    cfg["inputs"].pop("disambiguation", None)
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    code, _, err = run(capsys, "build", "--config", str(p), "--out", str(tmp_path / "o"))
    assert code == 2 and "MissingInput" in err


def test_stats(capsys, built):
    _, out, _ = built
    code, text, _ = run(capsys, "stats", "--release", str(out))
    rep = json.loads(text)
    assert code == 0 and set(rep["sense_counts"]) == {"en", "de", "zh"}


def test_validate_clean_and_truncated(capsys, fixture_dir, built):
    _, out, _ = built
    cfg = str(fixture_dir / "config.json")
    code, text, _ = run(capsys, "validate-pointers", "--config", cfg, "--release", str(out), "--sample", "300")
    rep = json.loads(text)
    assert code == 0 and rep["classes"]["Exact"] == 300
    trunc = f"en={fixture_dir / 'truncated' / 'en.xml'}"
    code, text, _ = run(capsys, "validate-pointers", "--config", cfg, "--release", str(out), "--pages", trunc)
    assert code == 1 and json.loads(text)["classes"]["Fail"] > 0


def test_bench_eval_kgc_oracle(capsys, built, tmp_path):
    _, out, _ = built
    true = (out / "bench" / "kgc" / "all_true.tsv").read_text().splitlines()
    pred = tmp_path / "scores.tsv"
    pred.write_text("".join(f"{l}\t1.0\n" for l in true))
    code, text, _ = run(capsys, "bench", "eval", "kgc", "--release", str(out), "--predictions", str(pred))
    rep = json.loads(text)
    assert code == 0 and rep["mrr"] == "1.0" and rep["n"] > 0


def test_bench_eval_mkqa_gold(capsys, built, tmp_path):
    _, out, _ = built
    rows = [json.loads(l) for l in (out / "bench" / "mkqa" / "en.jsonl").read_text().splitlines()]
    pred = tmp_path / "p.jsonl"
    pred.write_text("".join(json.dumps({"id": r["id"], "lf": r["lf"]}) + "\n" for r in rows))
    code, text, _ = run(capsys, "bench", "eval", "mkqa", "--release", str(out), "--predictions", str(pred),
                        "--split", "train")
    rep = json.loads(text)
    assert code == 0 and rep["macro_f1"] == "1.0" and rep["valid_pct"] == "100.0"


def test_bench_eval_mfc_gold(capsys, built, tmp_path):
    _, out, _ = built
    rows = [json.loads(l) for l in (out / "bench" / "mfc" / "en.jsonl").read_text().splitlines()]
    pred = tmp_path / "p.jsonl"
    with open(pred, "w") as fh:
        for r in rows:
            ev = [e["pointer"] for e in r["gold_evidence"]]
            fh.write(json.dumps({"claim_id": r["claim_id"], "label": r["label"], "evidence": ev,
                                 "spans": [e["spans"] for e in r["gold_evidence"]]}) + "\n")
    code, text, _ = run(capsys, "bench", "eval", "mfc", "--release", str(out), "--predictions", str(pred))
    rep = json.loads(text)
    assert code == 0 and rep["accuracy"] == "1.0" and rep["recall_at_5"] == "1.0" and rep["span_f1"] == "1.0"


def test_fixture_command(capsys, tmp_path):
    code, text, _ = run(capsys, "fixture", "--out", str(tmp_path / "fx"))
    assert code == 0 and (tmp_path / "fx" / "config.json").exists()
