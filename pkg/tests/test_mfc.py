import json
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from factforge.bench.mfc import (LABELS, NEI, REFUTED, SUPPORTED, GenerationStarved, MfcClaim, MfcInputs,
                                 generate_mfc_claims, largest_remainder, mfc_metrics, span_tokens, token_f1)
from factforge.bench.splits import assign_all

PTR = {"language": "en", "page_id": 1, "revision_id": 10, "view": "SENTENCE", "locator": {"sentence_index": 0},
       "start": 0, "end": 9}
UNIT = "Alice was born in 1950 in Berlin."


def ptr(i):
    return {**PTR, "locator": {"sentence_index": i}}


def gold(cid="c1", label=SUPPORTED, spans=((18, 22),)):
    ev = [] if label == NEI else [{"pointer": ptr(0), "spans": [list(s) for s in spans], "unit_text": UNIT}]
    return MfcClaim(cid, "en", "x", label, "y", "Test", ev)


@pytest.mark.parametrize("rank, hit", [(1, 1.0), (5, 1.0), (6, 0.0)])
def test_recall_at_5_boundary(rank, hit):
    ranked = [ptr(i) for i in range(1, rank)] + [ptr(0)]
    rep = mfc_metrics({"c1": {"label": SUPPORTED, "evidence": ranked}}, [gold()])
    assert rep.recall_at_5 == hit


def test_span_f1_identical_and_omitted():
    g = gold()
    same = {"c1": {"label": SUPPORTED, "evidence": [ptr(0)], "spans": [[[18, 22]]]}}
    assert mfc_metrics(same, [g]).span_f1 == 1.0
    omitted = {"c1": {"label": SUPPORTED, "evidence": [ptr(0)]}}
    assert mfc_metrics(omitted, [g]).span_f1 == 0.0
    wrong_unit = {"c1": {"label": SUPPORTED, "evidence": [ptr(3)], "spans": [[[18, 22]]]}}
    assert mfc_metrics(wrong_unit, [g]).span_f1 == 0.0


def test_empty_gold_conventions():
    assert token_f1(set(), set()) == 1.0
    assert token_f1({1}, set()) == 0.0 and token_f1(set(), {1}) == 0.0
    # NEI claims are scored on the label only
    rep = mfc_metrics({"c1": {"label": NEI}}, [gold(label=NEI)])
    assert rep.accuracy == 1.0 and rep.n_verifiable == 0 and rep.recall_at_5 == 0.0
    assert mfc_metrics({}, []).n == 0


def test_token_overlap():
    assert span_tokens(UNIT, [[18, 22]]) == {4}
    assert span_tokens(UNIT, [[0, 3]]) == {0}  # partial token still counts
    assert token_f1({1, 2}, {2, 3}) == pytest.approx(0.5)


def test_label_metrics():
    gs = [gold("a"), gold("b", REFUTED), gold("c", NEI)]
    preds = {"a": {"label": SUPPORTED}, "b": {"label": SUPPORTED}, "c": {"label": NEI}}
    rep = mfc_metrics(preds, gs)
    assert rep.accuracy == pytest.approx(2 / 3)
    # per label F1: Supported 2/3, Refuted 0, NEI 1
    assert rep.macro_f1 == pytest.approx((2 / 3 + 0 + 1) / 3)


def test_largest_remainder_3000():
    assert largest_remainder(3000) == [1020, 990, 990]


@given(st.integers(0, 10**5))
def test_largest_remainder_sums_and_is_close(n):
    c = largest_remainder(n)
    assert sum(c) == n
    for k, r in zip(c, (0.34, 0.33, 0.33)):
        assert abs(k - n * r) < 1


def _inputs(state):
    splits = assign_all([y.synset_id for y in state.synsets], state.build_id)
    conflicts = [e for e in state.edges if e.relation_type == "POTENTIAL_CONFLICT"]
    labels = {q: dict(e.labels) for q, e in state.entities.items()}
    return MfcInputs(state.synsets, {s.factsense_id: s for s in state.senses}, labels, splits, conflicts,
                     set(state.res.relation_map.functional_properties), state.res.packs)


def test_generation_ratio_and_labels(built):
    state, out, _ = built
    for lang in ("en", "de", "zh"):
        rows = [json.loads(l) for l in (out / "bench" / "mfc" / f"{lang}.jsonl").read_text().splitlines()]
        c = Counter(r["label"] for r in rows)
        assert [c[l] for l in LABELS] == largest_remainder(len(rows))
        assert all(r["gold_evidence"] for r in rows if r["label"] != NEI)
        assert all(not r["gold_evidence"] for r in rows if r["label"] == NEI)
    syn = {y.synset_id: y for y in state.synsets}
    rows = [json.loads(l) for l in (out / "bench" / "mfc" / "en.jsonl").read_text().splitlines()]
    for r in rows:
        if r["label"] == REFUTED:
            y = syn[r["source_synset_id"]]
            assert r["value"] != y.norm_value


def test_starved_generation_raises(built):
    state, _, _ = built
    with pytest.raises(GenerationStarved):
        generate_mfc_claims(_inputs(state), "zh", state.build_id, n=10**6)


def test_generation_deterministic(built):
    state, _, _ = built
    a = generate_mfc_claims(_inputs(state), "de", state.build_id, n=300)
    b = generate_mfc_claims(_inputs(state), "de", state.build_id, n=300)
    assert [x.to_record() for x in a] == [x.to_record() for x in b]
    assert [sum(x.label == l for x in a) for l in LABELS] == [102, 99, 99]
