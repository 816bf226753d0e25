import math

import pytest
from hypothesis import given, strategies as st

from factforge.diag import (EmptyCorpus, compute_concentration, compute_funnel, size_bucket, slice_concentration,
                            stats_from_release)


def test_uniform_concentration():
    c = compute_concentration({"en": 5, "de": 5, "zh": 5, "fr": 5})
    assert c.gini == 0.0 and c.n_eff == pytest.approx(4, abs=1e-12)


def test_known_entropy():
    c = compute_concentration({"a": 2, "b": 1, "c": 1})
    assert abs(c.entropy - 1.5 * math.log(2)) <= 1e-12


def test_single_language_gini():
    # all mass on one of k: sum |pi - pj| = 2 (k - 1) / k ... over 2k gives (k - 1) / k
    c = compute_concentration({"a": 7, "b": 0, "c": 0})
    assert c.gini == pytest.approx(2 / 3) and c.n_eff == pytest.approx(1.0)


def test_empty_and_negative():
    with pytest.raises(EmptyCorpus):
        compute_concentration({"a": 0})
    with pytest.raises(ValueError):
        compute_concentration({"a": -1, "b": 3})


@given(st.dictionaries(st.sampled_from("abcdefg"), st.integers(0, 1000), min_size=1).filter(
    lambda d: sum(d.values()) > 0))
def test_concentration_bounds(d):
    c = compute_concentration(d)
    k = len(d)
    assert -1e-12 <= c.gini <= (k - 1) / k + 1e-12
    assert 1 - 1e-9 <= c.n_eff <= k + 1e-9
    assert math.isclose(sum(c.shares.values()), 1.0)


def test_funnel_conditional_retention():
    f = compute_funnel({"en": [None, None, "matching", "sitelink"], "de": ["page_retrieval", None]})
    en = {s.stage: s for s in f.per_language["en"]}
    assert (en["sitelink"].entered, en["sitelink"].retained) == (4, 3)
    assert en["matching"].entered == 3 and en["matching"].retention == pytest.approx(2 / 3)
    assert f.macro["sitelink"] == pytest.approx((0.75 + 1.0) / 2)
    assert f.micro["sitelink"] == pytest.approx(5 / 6)


@pytest.mark.parametrize("n, b", [(1, "1"), (2, "2"), (3, "3-5"), (5, "3-5"), (6, ">=6"), (40, ">=6")])
def test_size_buckets(n, b):
    assert size_bucket(n) == b


def test_stats_from_release(built):
    state, out, manifest = built
    rep = stats_from_release(out)
    assert sum(rep.sense_counts.values()) == manifest["counts"]["factsenses"]
    assert sum(rep.synset_sizes.values()) == manifest["counts"]["synsets"]
    assert sum(sum(v.values()) for v in rep.ungrounded.values()) == manifest["counts"]["ungrounded"]
    en = {s.stage: s for s in rep.funnel.per_language["en"]}
    assert en["sitelink"].entered == manifest["counts"]["statements"]
    assert 0 < rep.concentration.gini < 1


def test_slice_hook(built):
    _, out, _ = built
    whole = stats_from_release(out)
    one = slice_concentration(out, lambda s: "all")
    assert one["all"].shares == pytest.approx(whole.concentration.shares)
    by_match = slice_concentration(out, lambda s: s["match_type"] if s["match_type"] == "INFOBOX_FIELD" else None)
    assert set(by_match) == {"INFOBOX_FIELD"}
    assert sum(by_match["INFOBOX_FIELD"].shares.values()) == pytest.approx(1.0)
