import random
from decimal import Decimal

import pytest
from hypothesis import given, strategies as st

from factforge.grounding import (C_BASE, FactorOutOfRange, LanguageIndex, PageContext, SchemaMap, c_amb,
                                 dedup_candidates, ground_statement, match_lexical, match_link, match_structure,
                                 resolve_subject_page, score_confidence)
from factforge.ingest import LinkTables, RawPage
from factforge.model import FactStatement, MatchType, ReasonCode, TypedValue
from factforge.pipeline import data_path

SCHEMA = SchemaMap.load(data_path("schema_map.tsv"))
ALLOW = SCHEMA.templates("en")
T = TypedValue


def page(pid, title, text, **kw):
    return RawPage(pid, pid * 10, title, kw.pop("ns", 0), text, **kw)


def index(en, pages, sitelinks, redirects=None, disamb=(), labels=None):
    links = LinkTables(redirects or {}, set(disamb))
    return LanguageIndex.build("en", en, pages, links, sitelinks, labels)


def ctx_for(en, text, extra_pages=(), sitelinks=None, redirects=None, labels=None):
    p = page(1, "Subject", text)
    idx = index(en, [p, *extra_pages], {"Subject": "Q1", **(sitelinks or {})}, redirects, labels=labels)
    return PageContext.build(p, idx, ALLOW)


def st_(prop, value, sid="Q1$x"):
    return FactStatement(sid, "Q1", prop, value)


def ground(ctx, f):
    return ground_statement(f, ctx, SCHEMA, "B", "t/1", language="en")


# ---------------------------------------------------------------- subject resolution


def test_subject_resolution(en):
    a = page(1, "Alpha", "x")
    r = page(2, "Old", "#REDIRECT [[Alpha]]", is_redirect=True, redirect_target="Alpha")
    d = page(3, "Delta", "may refer to")
    idx = index(en, [a, r, d], {"Alpha": "Q1"}, disamb=[3])
    assert resolve_subject_page("Q1", "en", {"en": "Alpha"}, idx).page is a
    red = resolve_subject_page("Q1", "en", {"en": "Old"}, idx)
    assert red.page is a and red.c_resolve == 0.95
    assert resolve_subject_page("Q1", "en", {}, idx, False, "Alpha").page is None
    assert resolve_subject_page("Q1", "en", {"en": "Delta"}, idx).detail == "disambiguation"
    assert resolve_subject_page("Q1", "en", {"en": "Nope"}, idx).detail == "page_missing"


def test_fallback_rejects_ambiguity(en):
    a, b = page(1, "Mercury", "x"), page(2, "MERCURY", "y")
    idx = index(en, [a, b], {})
    r = resolve_subject_page("Q1", "en", {}, idx, True, "mercury")
    assert r.page is None and r.detail == "fallback_ambiguous"
    idx1 = index(en, [a], {})
    r1 = resolve_subject_page("Q1", "en", {}, idx1, True, "mercury")
    assert r1.page is a and r1.c_resolve == 0.9


def test_redirect_cycle_reported(en):
    x = page(1, "X", "", is_redirect=True, redirect_target="Y")
    y = page(2, "Y", "", is_redirect=True, redirect_target="X")
    idx = index(en, [x, y], {})
    assert resolve_subject_page("Q1", "en", {"en": "X"}, idx).detail == "redirect_cycle"
    assert idx.links.cycles


# ---------------------------------------------------------------- matchers


def test_structure_year(en):
    ctx = ctx_for(en, "{{Infobox person|birth_date=1980}}")
    f = st_("P569", T.time_("+1980-00-00T00:00:00Z", 9))
    (c,) = match_structure(f, ctx.views.infobox, SCHEMA, ctx)
    assert c.match_type is MatchType.INFOBOX_FIELD and c.surface == "1980"


def test_structure_wrong_param(en):
    ctx = ctx_for(en, "{{Infobox person|death_date=1980}}")
    f = st_("P569", T.time_("+1980-00-00T00:00:00Z", 9))
    assert match_structure(f, ctx.views.infobox, SCHEMA, ctx) == []


def test_structure_unit_mismatch_is_datatype(en):
    ctx = ctx_for(en, "{{Infobox settlement|area_total_km2=120}}")
    out = ground(ctx, st_("P2046", T.quantity_("120", "Q712226")))
    assert out.senses == [] and out.reason.code is ReasonCode.DATATYPE_MISMATCH


def test_link_direct_and_redirect(en):
    berlin = page(2, "Berlin", "capital")
    text = "Lead [[Berlin]] here. Later [[Berlin, Germany|it]] again."
    ctx = ctx_for(en, text, [berlin], {"Berlin": "Q64"}, {"Berlin, Germany": "Berlin"})
    cands = match_link(st_("P19", T.entity_("Q64")), ctx.views.sentences, ctx)
    assert sorted(c.resolve for c in cands) == [0.95, 1.0]
    assert match_link(st_("P19", T.entity_("Q65")), ctx.views.sentences, ctx) == []


def test_lexical_date(en):
    ctx = ctx_for(en, "He was born on 12 May 1999 in a town.")
    (c,) = match_lexical(st_("P569", T.time_("+1999-05-12T00:00:00Z", 11)), ctx.views.sentences, ctx)
    assert c.match_type is MatchType.LEXICAL_VALUE and c.surface == "12 May 1999"


def test_lexical_approximation_rejected(en):
    ctx = ctx_for(en, "He was about 1.7 m tall.")
    assert match_lexical(st_("P2048", T.quantity_("1.7", "Q11573")), ctx.views.sentences, ctx) == []
    ctx2 = ctx_for(en, "He was 1.7 m tall.")
    assert len(match_lexical(st_("P2048", T.quantity_("1.7", "Q11573")), ctx2.views.sentences, ctx2)) == 1


def test_lead_weak_label(en):
    text = "Subject is a writer from Fooland.\n\n== Life ==\nFooland appears later."
    ctx = ctx_for(en, text, labels={"Q9": ["Fooland"]})
    (c,) = match_lexical(st_("P27", T.entity_("Q9")), ctx.views.sentences, ctx)
    assert c.match_type is MatchType.LEAD_WEAK and c.unit.lead


def test_dedup_structure_wins_with_alternative(en):
    berlin = page(2, "Berlin", "x")
    ctx = ctx_for(en, "{{Infobox person|birth_place=[[Berlin]]}}\nBorn in [[Berlin]].", [berlin],
                  {"Berlin": "Q64"}, labels={"Q64": ["Berlin"]})
    out = ground(ctx, st_("P19", T.entity_("Q64")))
    types = sorted(s.match_type.value for s in out.senses)
    assert types == ["INFOBOX_FIELD", "WIKILINK_ENTITY"]  # one per unit, both units kept
    lead = next(s for s in out.senses if s.match_type is MatchType.WIKILINK_ENTITY)
    assert lead.alternatives == ["LEAD_WEAK"]


def test_dedup_identical_candidates(en):
    ctx = ctx_for(en, "Born 12 May 1999.")
    f = st_("P569", T.time_("+1999-05-12T00:00:00Z", 11))
    c = match_lexical(f, ctx.views.sentences, ctx)
    (d,) = dedup_candidates(c + c)
    assert d.ambiguity == 0


def test_no_valid_text_and_scope_excluded(en):
    out = ground(ctx_for(en, "{{Stub}}"), st_("P19", T.entity_("Q64")))
    assert out.reason.code is ReasonCode.NO_VALID_TEXT and out.reason.stage == "unit_construction"
    berlin = page(2, "Berlin", "x")
    ctx = ctx_for(en, "Lead text only.\n\n== See also ==\n* [[Berlin]]\n", [berlin], {"Berlin": "Q64"})
    out = ground(ctx, st_("P19", T.entity_("Q64")))
    assert out.reason.code is ReasonCode.SCOPE_EXCLUDED
    assert ground_statement(st_("P19", T.entity_("Q64")), None, SCHEMA, "B", "t", language="en").reason.stage \
        == "page_retrieval"


def test_groundable_statement(en):
    ctx = ctx_for(en, "{{Infobox person|birth_date={{birth date|1950|3|14}}}}\nBorn 14 March 1950.")
    out = ground(ctx, st_("P569", T.time_("+1950-03-14T00:00:00Z", 11)))
    assert out.reason is None and len(out.senses) == 2
    for s in out.senses:
        assert 0 <= s.pointer.start <= s.pointer.end <= len(s.unit_text)
        assert s.unit_text[s.pointer.start:s.pointer.end] == s.sentence
        assert Decimal("0.5") <= s.confidence <= Decimal("0.95")


# ---------------------------------------------------------------- confidence


def test_confidence_examples():
    assert score_confidence(MatchType.WIKILINK_ENTITY) == Decimal("0.95")
    assert score_confidence(MatchType.LEAD_WEAK, Decimal("0.9"), 0.9, 3, False) == Decimal("0.5")
    assert score_confidence(MatchType.LEXICAL_VALUE, Decimal("0.95")) == Decimal("0.76")


def test_c_amb_closed_form():
    assert c_amb(0) == 1.0
    assert c_amb(1) == 0.5
    assert c_amb(3) == pytest.approx(1 / 3)


@pytest.mark.parametrize("bad", [dict(dtype=0), dict(dtype=Decimal("1.1")), dict(resolve=0.0), dict(resolve=2)])
def test_factor_range_checked(bad):
    with pytest.raises(FactorOutOfRange):
        score_confidence(MatchType.INFOBOX_FIELD, **bad)


factor = st.decimals(min_value=Decimal("0.01"), max_value=1, places=2)


@given(st.sampled_from(list(MatchType)), factor, factor, st.integers(0, 20), st.booleans())
def test_confidence_bounds(mt, dt, rs, k, ok):
    c = score_confidence(mt, dt, float(rs), k, ok)
    assert Decimal("0.5") <= c <= Decimal("0.95")


def test_confidence_monotone_random():
    rng = random.Random(3)
    types = sorted(MatchType, key=lambda m: C_BASE[m])
    for _ in range(2000):
        dt, rs = Decimal(rng.randint(1, 100)) / 100, rng.randint(1, 100) / 100
        k, ok = rng.randint(0, 10), rng.random() < 0.5
        base = score_confidence(types[0], dt, rs, k, ok)
        for m in types[1:]:
            nxt = score_confidence(m, dt, rs, k, ok)
            assert nxt >= base
            base = nxt
        assert score_confidence(MatchType.INFOBOX_FIELD, dt, rs, k + 1, ok) <= \
            score_confidence(MatchType.INFOBOX_FIELD, dt, rs, k, ok)
        assert score_confidence(MatchType.INFOBOX_FIELD, dt, rs, k, False) <= \
            score_confidence(MatchType.INFOBOX_FIELD, dt, rs, k, True)
    # inside the clip window a lower base gives a strictly lower score
    assert score_confidence(MatchType.LEXICAL_VALUE, Decimal("0.9")) < \
        score_confidence(MatchType.WIKILINK_ENTITY, Decimal("0.9"))
