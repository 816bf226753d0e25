"""End-to-end acceptance checks.  Each test prints one PASS/FAIL line in the run summary."""
import math
import random
import sys
import time
from collections import Counter
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

import pytest

from factforge.bench.kgc import filtered_rank, project_kgc, read_tsv, triple_sort_key
from factforge.bench.mfc import (LABELS, NEI, SUPPORTED, MfcClaim, MfcInputs, generate_mfc_claims, mfc_metrics,
                                 token_f1)
from factforge.bench.mkqa import MAX_ANSWERS, OVERFLOW, KGraph, enumerate_forms, evaluate_mkqa, execute_lf
from factforge.bench.splits import Split, assign_all, assign_split, split_for_bucket
from factforge.cli import load_pages, validate_pointers
from factforge.diag import compute_concentration
from factforge.fixtures import PERTURB_WORD
from factforge.grounding import score_confidence
from factforge.model import FactStatement, MatchType, RelaxKind, TypedValue as T
from factforge.pipeline import BuildConfig, data_path, run_build
from factforge.policy import DEFAULT_POLICY, NormalizationPolicy, aggregation_key
from factforge.relations import derive_all, score_edge_confidence
from factforge.release import read_family
from factforge.synsets import build_synsets

RELAXED = NormalizationPolicy.load(data_path("policy_relaxed.json"))


def tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


# ---------------------------------------------------------------- determinism


def test_determinism_end_to_end(fixture_dir, tmp_path):
    cfg = BuildConfig.load(fixture_dir / "config.json")
    langs = cfg.languages
    n_pages = 0
    for lang in langs:
        n_pages += len(load_pages(cfg.resolve(cfg.pages[lang])))
    assert len(langs) >= 3 and n_pages >= 200
    runs = []
    for name in ("a", "b"):
        t0 = time.perf_counter()
        res = run_build(fixture_dir / "config.json", tmp_path / name, bench=True)
        elapsed = time.perf_counter() - t0
        assert res.status == 0, res.error
        assert elapsed < 60, f"build took {elapsed:.1f}s"
        runs.append(res)
    assert runs[0].manifest["counts"]["statements"] >= 2000
    a, b = tree(tmp_path / "a"), tree(tmp_path / "b")
    assert a.keys() == b.keys()
    diff = [k for k in a if a[k] != b[k]]
    assert diff == []
    assert a["manifest.json"] == b["manifest.json"]


# ---------------------------------------------------------------- pointer closure


def _expected_vs_got(rep, expect) -> list:
    got = {r["factsense_id"]: r["class"] for r in rep["non_exact"]}
    return [(fid, want, got.get(fid, "Exact")) for fid, want in expect.items() if got.get(fid, "Exact") != want]


def test_pointer_closure(fixture_dir, built):
    state, out, _ = built
    cfg = fixture_dir / "config.json"
    clean = validate_pointers(cfg, out)
    assert clean["checked"] == len(state.senses)
    assert clean["classes"] == {"Exact": len(state.senses), "Drift": 0, "Fail": 0}

    texts = {r["factsense_id"]: r for r in read_family(out, "factsenses_text")}
    senses = list(read_family(out, "factsenses"))
    # perturbation: a unit drifts exactly when its text held the perturbed word
    pert = validate_pointers(cfg, out, pages_override={"en": str(fixture_dir / "perturbed" / "en.xml")})
    expect = {s["factsense_id"]: ("Drift" if s["language"] == "en" and PERTURB_WORD in
                                  texts[s["factsense_id"]]["unit_text"] else "Exact") for s in senses}
    assert _expected_vs_got(pert, expect) == []
    assert pert["classes"]["Drift"] > 0 and pert["classes"]["Fail"] == 0

    # truncation: pages lost past the cut fail, everything earlier stays exact
    trunc_path = fixture_dir / "truncated" / "en.xml"
    surviving = set(load_pages(trunc_path))
    trunc = validate_pointers(cfg, out, pages_override={"en": str(trunc_path)})
    expect = {s["factsense_id"]: ("Fail" if s["language"] == "en" and s["pointer"]["page_id"] not in surviving
                                  else "Exact") for s in senses}
    assert _expected_vs_got(trunc, expect) == []
    assert trunc["classes"]["Fail"] > 0


# ---------------------------------------------------------------- order invariance


def _random_value(rng):
    r = rng.random()
    if r < 0.3:
        return T.entity_(f"Q{rng.randint(1, 999)}")
    if r < 0.6:
        return T.time_(f"+{rng.randint(1800, 2020)}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}T00:00:00Z",
                       rng.choice([9, 10, 11]))
    if r < 0.8:
        return T.quantity_(Decimal(rng.randint(0, 10**6)).scaleb(-2), rng.choice(["1", "Q11573", "Q174728"]))
    return T.string_(rng.choice(["a", "b", "Xy", "zz"]))


def test_qualifier_order_invariance():
    rng = random.Random(20240601)
    failures = 0
    for i in range(1000):
        quals = [(rng.choice(["P580", "P582", "P585", "P642", "P1545"]), _random_value(rng))
                 for _ in range(rng.randint(2, 6))]
        perm = quals[:]
        while perm == quals and len(set(map(repr, quals))) > 1:
            rng.shuffle(perm)
        a = FactStatement(f"Q1${i}", "Q1", "P39", T.entity_("Q30185"), quals)
        b = FactStatement(f"Q1${i}b", "Q1", "P39", T.entity_("Q30185"), perm)
        for pol in (DEFAULT_POLICY, RELAXED):
            ka, kb = aggregation_key(a, pol), aggregation_key(b, pol)
            (ya,), (yb,) = build_synsets([a], "B", pol), build_synsets([b], "B", pol)
            failures += ka != kb or ya.synset_id != yb.synset_id
    assert failures == 0


# ---------------------------------------------------------------- strict no-false-merge


def _near_duplicates(n=500):
    """(kind, a, b) pairs; kind says which relaxation (if any) may merge them."""
    rng = random.Random(7)
    rows = []
    for i in range(n):
        subj = f"Q{10000 + i}"
        y, m, d = rng.randint(1850, 2000), rng.randint(1, 12), rng.randint(1, 27)
        k = i % 5
        if k == 0:  # off-by-one day at day precision
            a = FactStatement(f"{subj}$a", subj, "P569", T.time_(f"+{y}-{m:02d}-{d:02d}T00:00:00Z", 11))
            b = FactStatement(f"{subj}$b", subj, "P569", T.time_(f"+{y}-{m:02d}-{d + 1:02d}T00:00:00Z", 11))
            rows.append((RelaxKind.TIME_PRECISION_RELAX, a, b))
        elif k == 1:  # off-by-one year never merges
            a = FactStatement(f"{subj}$a", subj, "P570", T.time_(f"+{y}-00-00T00:00:00Z", 9))
            b = FactStatement(f"{subj}$b", subj, "P570", T.time_(f"+{y + 1}-00-00T00:00:00Z", 9))
            rows.append((None, a, b))
        elif k == 2:  # m vs cm
            cm = rng.randint(140, 210)
            a = FactStatement(f"{subj}$a", subj, "P2048", T.quantity_(Decimal(cm).scaleb(-2), "Q11573"))
            b = FactStatement(f"{subj}$b", subj, "P2048", T.quantity_(Decimal(cm), "Q174728"))
            rows.append((RelaxKind.UNIT_CONVERT, a, b))
        elif k == 3:  # alias string differing in case only
            name = rng.choice(["Bard", "Iron Duke", "Der Alte", "Boz"])
            a = FactStatement(f"{subj}$a", subj, "P1449", T.monotext_(name, "en"))
            b = FactStatement(f"{subj}$b", subj, "P1449", T.monotext_(name.lower(), "en"))
            rows.append((RelaxKind.STRING_CANON, a, b))
        else:  # alias string that is genuinely different
            a = FactStatement(f"{subj}$a", subj, "P1449", T.monotext_("Bard", "en"))
            b = FactStatement(f"{subj}$b", subj, "P1449", T.monotext_("Bards", "en"))
            rows.append((None, a, b))
    return rows


def test_strict_no_false_merge():
    rows = _near_duplicates()
    assert len(rows) == 500
    sts = [f for _, a, b in rows for f in (a, b)]
    strict_key = {f.statement_id: aggregation_key(f, DEFAULT_POLICY).encode("utf-8") for f in sts}
    violations = []
    for y in build_synsets(sts, "B"):
        if len({strict_key[m] for m in y.members}) != 1:
            violations.append(("strict", y.members))
    expected = {a.statement_id: kind for kind, a, b in rows}
    expected.update({b.statement_id: kind for kind, a, b in rows})
    merged_kinds = Counter()
    for y in build_synsets(sts, "B", RELAXED):
        if len(y.members) == 1:
            continue
        kind = expected[y.members[0]]
        reasons = {r.kind for r in y.merge_reasons}
        if kind is None or kind not in reasons:
            violations.append(("relaxed", y.members, kind, reasons))
        merged_kinds[kind] += 1
    assert violations == []
    assert merged_kinds == {RelaxKind.TIME_PRECISION_RELAX: 100, RelaxKind.UNIT_CONVERT: 100,
                            RelaxKind.STRING_CANON: 100}


# ---------------------------------------------------------------- split statistics


def test_split_statistics():
    ids = [f"syn{i:06d}" for i in range(100000)]
    c = Counter(assign_all(ids, "acceptance-build").values())
    frac = {s: 100 * c[s] / len(ids) for s in Split}
    assert abs(frac[Split.TRAIN] - 80) <= 0.5
    assert abs(frac[Split.DEV] - 10) <= 0.3 and abs(frac[Split.TEST] - 10) <= 0.3
    want = {79: Split.TRAIN, 80: Split.DEV, 89: Split.DEV, 90: Split.TEST}
    assert {b: split_for_bucket(b) for b in want} == want
    found = {}
    for sid in ids:
        a = assign_split(sid, "acceptance-build")
        if a.h % 100 in want and a.h % 100 not in found:
            found[a.h % 100] = a.split
    assert found == want


# ---------------------------------------------------------------- KGC leakage


def test_kgc_leakage(built):
    _, out, _ = built
    files = [set(read_tsv(out / "bench" / "kgc" / f"{s}.tsv")) for s in ("train", "dev", "test")]
    assert not (files[0] & files[1] or files[0] & files[2] or files[1] & files[2])

    rng = random.Random(5)
    sts, splits_by_stmt, planted = [], {}, set()
    for i in range(200):
        s, o = f"Q{rng.randint(1, 60)}", f"Q{rng.randint(61, 120)}"
        f = FactStatement(f"S{i}", s, "P1", T.entity_(o))
        sts.append(f)
        splits_by_stmt[f.statement_id] = [Split.TRAIN, Split.DEV, Split.TEST][i % 3]
    keys_seen = {(f.subject, f.property, f.value.entity) for f in sts}
    for i in range(20):
        while True:
            key = (f"Q{rng.randint(200, 260)}", "P1", f"Q{rng.randint(300, 360)}")
            if key not in keys_seen and key not in planted:
                break
        planted.add(key)
        q = [("P580", T.time_(f"+{1900 + i}-00-00T00:00:00Z", 9))]
        a = FactStatement(f"C{i}a", key[0], "P1", T.entity_(key[2]))
        b = FactStatement(f"C{i}b", key[0], "P1", T.entity_(key[2]), q)
        sts += [a, b]
        splits_by_stmt[a.statement_id], splits_by_stmt[b.statement_id] = (
            (Split.DEV, Split.TEST) if i % 2 else (Split.TRAIN, Split.TEST))
    ys = build_synsets(sts, "B")
    splits = {y.synset_id: splits_by_stmt[y.members[0]] for y in ys}
    # a key shared by two non-planted statements in different splits would be a collision too
    extra = Counter((f.subject, f.property, f.value.entity) for f in sts if f.statement_id.startswith("S"))
    accidental = {k for k, n in extra.items() if n > 1}
    proj = project_kgc(ys, splits)
    flagged = {k for k, _ in proj.collisions}
    assert flagged - accidental == planted
    parts = [set(v) for v in proj.by_split().values()]
    assert not (parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2])
    assert not planted & (parts[1] | parts[2])


# ---------------------------------------------------------------- filtered ranking oracle


def _brute_ranks(scorer, test, true, ents):
    ents = sorted(ents, key=lambda e: int(e[1:]))
    ranks = []
    for s, p, o in test:
        for mk, tgt in ((lambda e: (s, p, e), o), (lambda e: (e, p, o), s)):
            st = scorer(*mk(tgt))
            ranks.append(1 + sum(1 for e in ents if e != tgt and mk(e) not in true and
                                 (scorer(*mk(e)) > st or (scorer(*mk(e)) == st and int(e[1:]) < int(tgt[1:])))))
    return ranks


def test_filtered_ranking_oracle():
    rng = random.Random(11)
    ents = [f"Q{i}" for i in range(1, 51)]
    true = set()
    while len(true) < 300:
        true.add((rng.choice(ents), rng.choice(["P1", "P2", "P3", "P4"]), rng.choice(ents)))
    true = sorted(true, key=triple_sort_key)
    test = true[::10]
    ts = set(true)
    scorers = {"oracle": lambda s, p, o: float((s, p, o) in ts),
               "anti": lambda s, p, o: -float((s, p, o) in ts),
               "constant": lambda s, p, o: 0.0}
    for name, f in scorers.items():
        for use_numba in (False, None):
            got = filtered_rank(f, test, true, ents, use_numba)
            want = _brute_ranks(f, test, ts, ents)
            mrr = sum(Fraction(1, r) for r in want) / len(want)
            hits = Fraction(sum(r <= 10 for r in want), len(want))
            assert (got.mrr_exact, got.hits10_exact) == (mrr, hits), name


# ---------------------------------------------------------------- MKQA executor


def test_mkqa_executor_equivalence():
    rng = random.Random(3)
    ents = [f"Q{i}" for i in range(1, 31)]
    triples, years, g = set(), {}, KGraph()
    for _ in range(150):
        t = (rng.choice(ents), rng.choice(["P1", "P2", "P31"]), rng.choice(ents))
        triples.add(t)
        g.add(*t)
    for e in ents[:12]:
        y = rng.choice([1900, 1901, 1902])
        lit = f"+{y}-00-00"
        triples.add((e, "P569", lit))
        years[lit] = y
        g.add(e, "P569", lit, y)

    def oracle(lf):
        ans = {o for s, p, o in triples if s == lf.subject and p == lf.path[0]}
        if lf.op != "hop1":
            ans = {o for m in ans for s, p, o in triples if s == m and p == lf.path[1]}
        c = lf.constraint
        if c is not None and c.kind == "type":
            ans = {a for a in ans if (a, "P31", c.arg) in triples}
        elif c is not None and c.kind == "year":
            ans = {a for a in ans if years.get(a) == c.arg}
        elif c is not None and c.kind == "limit":
            order = sorted(ans, key=lambda a: (0, int(a[1:]), "") if a[:1] == "Q" and a[1:].isdigit() else (1, 0, a))
            ans = set(order[: c.arg])
        return OVERFLOW if len(ans) > MAX_ANSWERS else frozenset(ans)

    forms = enumerate_forms(g, years=[1900, 1901, 1902], limits=[1, 2, 5])
    mismatches = [lf.surface() for lf in forms if execute_lf(lf, g) != oracle(lf)]
    assert forms and mismatches == []

    gold = sorted(oracle(forms[0]))
    inst = [{"id": "ok", "answers": gold}, {"id": "bad", "answers": gold}, {"id": "missing", "answers": gold}]
    rep = evaluate_mkqa({"ok": forms[0].surface(), "bad": "(hop1 Q1 P1 junk"}, inst, g)
    assert rep.valid_pct == pytest.approx(100 / 3)
    assert rep.macro_f1 == pytest.approx(1 / 3)


# ---------------------------------------------------------------- MFC metrics


def test_mfc_metrics(built):
    unit = "Ada was born in 1815 in London."
    ptr = lambda i: {"language": "en", "page_id": 1, "revision_id": 1, "view": "SENTENCE",  # noqa: E731
                     "locator": {"sentence_index": i}, "start": 0, "end": 3}
    g = MfcClaim("c", "en", "x", SUPPORTED, "y", "Test", [{"pointer": ptr(0), "spans": [[16, 20]], "unit_text": unit}])
    for rank, want in ((5, 1.0), (6, 0.0)):
        ev = [ptr(i) for i in range(1, rank)] + [ptr(0)]
        assert mfc_metrics({"c": {"label": SUPPORTED, "evidence": ev}}, [g]).recall_at_5 == want
    same = {"c": {"label": SUPPORTED, "evidence": [ptr(0)], "spans": [[[16, 20]]]}}
    assert mfc_metrics(same, [g]).span_f1 == 1.0
    assert mfc_metrics({"c": {"label": SUPPORTED, "evidence": [ptr(0)]}}, [g]).span_f1 == 0.0
    assert token_f1(set(), set()) == 1.0 and token_f1({0}, set()) == 0.0
    nei = MfcClaim("n", "en", "x", NEI, "y", "Test", [])
    assert mfc_metrics({"n": {"label": NEI}}, [nei]).n_verifiable == 0

    state, _, _ = built
    splits = assign_all([y.synset_id for y in state.synsets], state.build_id)
    conflicts = [e for e in state.edges if e.relation_type == "POTENTIAL_CONFLICT"]
    labels = {q: dict(e.labels) for q, e in state.entities.items()}
    inp = MfcInputs(state.synsets, {s.factsense_id: s for s in state.senses}, labels, splits, conflicts,
                    set(state.res.relation_map.functional_properties), state.res.packs)
    claims = generate_mfc_claims(inp, "en", state.build_id, n=3000)
    c = Counter(x.label for x in claims)
    assert len(claims) == 3000
    for lab, r in zip(LABELS, (0.34, 0.33, 0.33)):
        assert abs(c[lab] / 3000 - r) <= 0.02


# ---------------------------------------------------------------- confidence bounds


def test_confidence_bounds(built):
    state, _, _ = built
    assert all(Decimal("0.5") <= s.confidence <= Decimal("0.95") for s in state.senses)
    assert all(Decimal(0) <= e.confidence <= Decimal(1) for e in state.edges)
    rng = random.Random(13)
    bad = 0
    types = list(MatchType)
    for _ in range(10000):
        m = rng.choice(types)
        dt = Decimal(rng.randint(1, 99)) / 100
        rs = rng.randint(1, 99) / 100
        k, ok = rng.randint(0, 8), rng.random() < 0.5
        base = score_confidence(m, dt, rs, k, ok)
        bad += not (Decimal("0.5") <= base <= Decimal("0.95"))
        bad += score_confidence(m, dt + Decimal("0.01"), rs, k, ok) < base
        bad += score_confidence(m, dt, rs + 0.01, k, ok) < base
        bad += score_confidence(m, dt, rs, k + 1, ok) > base
        bad += score_confidence(m, dt, rs, k, True) < base
        w, c = Decimal(rng.randint(0, 100)) / 100, Decimal(rng.randint(0, 100)) / 100
        r, n = rng.randint(0, 20), rng.randint(0, 5)
        e = score_edge_confidence(w, c, r, n)
        bad += not (Decimal(0) <= e <= Decimal(1))
        bad += score_edge_confidence(w, c, r + 1, n) < e or score_edge_confidence(w, c, r, n + 1) < e
        bad += score_edge_confidence(min(Decimal(1), w + Decimal("0.01")), c, r, n) < e
    assert bad == 0


# ---------------------------------------------------------------- relation re-derivation


def test_relation_rederivation(built):
    state, out, _ = built
    released = Counter(r["relation_id"] for r in read_family(out, "relations"))
    rmap = state.res.relation_map
    again = derive_all(list(reversed(state.synsets)), rmap, state.build_id, state.cfg.hop_cap)
    assert Counter(e.relation_id for e in again) == released
    assert max(e.hop_depth for e in again) <= 2
    assert any(e.hop_depth == 2 for e in again)
    capped = derive_all(state.synsets, rmap, state.build_id, hop_cap=1)
    assert sorted(e.relation_id for e in capped) == sorted(e.relation_id for e in again if e.hop_depth < 2)


# ---------------------------------------------------------------- diagnostics closed forms


def test_diagnostics_closed_forms():
    for k in (1, 3, 7):
        c = compute_concentration({f"l{i}": 10 for i in range(k)})
        assert c.gini == 0 and abs(c.n_eff - k) <= 1e-12
    c = compute_concentration({"a": 0.5, "b": 0.25, "c": 0.25})
    assert abs(c.entropy - 1.5 * math.log(2)) <= 1e-12


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
