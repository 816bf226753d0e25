import random

import pytest
from hypothesis import given, strategies as st

from factforge.bench.mkqa import (INVALID, MAX_ANSWERS, OVERFLOW, KGraph, LogicalForm, enumerate_forms, evaluate_mkqa,
                                  execute_lf, parse_lf, score_mkqa, set_f1)

PROPS = ["P1", "P2", "P3", "P31"]


def random_graph(n=30, m=160, seed=11):
    rng = random.Random(seed)
    ents = [f"Q{i}" for i in range(1, n + 1)]
    triples = set()
    g = KGraph()
    for _ in range(m):
        s, p, o = rng.choice(ents), rng.choice(PROPS), rng.choice(ents)
        triples.add((s, p, o))
        g.add(s, p, o)
    years = {}
    for e in ents[:10]:
        y = 1900 + rng.randint(0, 3)
        lit = f"+{y}-00-00"
        triples.add((e, "P569", lit))
        years[lit] = y
        g.add(e, "P569", lit, y)
    return g, triples, years, ents


def oracle(lf, triples, years):
    """Independent evaluator over the raw triple list."""
    first = {o for s, p, o in triples if s == lf.subject and p == lf.path[0]}
    if lf.op == "hop1":
        ans = first
    else:
        ans = {o for m in first if m.startswith("Q") for s, p, o in triples if s == m and p == lf.path[1]}
    c = lf.constraint
    if c is not None and c.kind == "type":
        ans = {a for a in ans if a.startswith("Q") and (a, "P31", c.arg) in triples}
    elif c is not None and c.kind == "year":
        ans = {a for a in ans if years.get(a) == c.arg}
    elif c is not None and c.kind == "limit":
        qs = sorted((a for a in ans if a.startswith("Q")), key=lambda q: int(q[1:]))
        lits = sorted(a for a in ans if not a.startswith("Q"))
        ans = set((qs + lits)[: c.arg])
    return ans


def test_executor_matches_brute_force():
    g, triples, years, ents = random_graph()
    forms = enumerate_forms(g, years=[1900, 1901], limits=[1, 3])
    assert len(forms) > 1000
    for lf in forms:
        got = execute_lf(lf, g)
        want = oracle(lf, triples, years)
        assert got == (OVERFLOW if len(want) > MAX_ANSWERS else frozenset(want)), lf.surface()


def test_surface_roundtrip():
    g, *_ = random_graph()
    for lf in enumerate_forms(g, years=[1900], limits=[2])[:500]:
        assert parse_lf(lf.surface()) == lf


@pytest.mark.parametrize("bad", [
    "", "(hop1 Q1)", "(hop1 Q1 P2 P3)", "(hop3 Q1 P1 P2)", "hop1 Q1 P1", "(hop1 Q1 P1", "(hop1 q1 P1)",
    "(hop2c Q1 P1 P2 (limit 0))", "(hop2c Q1 P1 P2 (size 3))", "(hop1 Q1 P1) extra", "(hop1 Q1 P1 {x})",
    None, 42,
])
def test_invalid_strings(bad):
    assert parse_lf(bad) is INVALID


def test_invalid_scores_zero_and_counts_against_validity():
    g, triples, years, _ = random_graph()
    inst = [{"id": "a", "answers": sorted(execute_lf(LogicalForm("hop1", "Q1", ("P1",)), g))},
            {"id": "b", "answers": ["Q2"]}]
    rep = evaluate_mkqa({"a": "(hop1 Q1 P1)", "b": "(hop1 Q1"}, inst, g)
    assert rep.valid_pct == 50.0 and rep.macro_f1 == 0.5
    assert score_mkqa("garbage", ["Q1"], g) == (0.0, False)


def test_overflow_is_invalid():
    g = KGraph()
    for i in range(MAX_ANSWERS + 1):
        g.add("Q1", "P1", f"Q{i + 10}")
    lf = LogicalForm("hop1", "Q1", ("P1",))
    assert execute_lf(lf, g) is OVERFLOW
    assert score_mkqa(lf.surface(), ["Q10"], g) == (0.0, False)


def test_set_f1_edges():
    assert set_f1([], []) == 1.0 and set_f1(["a"], []) == 0.0 and set_f1([], ["a"]) == 0.0
    assert set_f1(["a", "b"], ["b", "c"]) == pytest.approx(0.5)


@given(st.sets(st.sampled_from("abcdef")), st.sets(st.sampled_from("abcdef"), min_size=1))
def test_set_f1_bounds(p, g):
    v = set_f1(p, g)
    assert 0.0 <= v <= 1.0 and (v == 1.0) == (p == g)


def test_release_instances_execute(built):
    import json

    from factforge.release import read_family
    from factforge.synsets import FactSynset

    _, out, _ = built
    g = KGraph.from_synsets(FactSynset.from_record(r) for r in read_family(out, "synsets"))
    path = next((out / "bench" / "mkqa").glob("*.jsonl"))
    rows = [json.loads(l) for l in path.read_text().splitlines()]
    assert rows
    for r in rows[:200]:
        assert score_mkqa(r["lf"], r["answers"], g) == (1.0, True)
