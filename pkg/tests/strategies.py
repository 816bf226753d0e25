"""Hypothesis strategies shared across test modules."""
from decimal import Decimal

from hypothesis import strategies as st

from factforge.model import FactStatement, Rank, TypedValue, ValueKind

qids = st.integers(1, 5000).map(lambda n: f"Q{n}")
pids = st.sampled_from(["P17", "P19", "P27", "P569", "P570", "P580", "P582", "P585", "P1082", "P2048"])


@st.composite
def times(draw):
    y = draw(st.integers(1000, 2099))
    m = draw(st.integers(1, 12))
    d = draw(st.integers(1, 28))
    prec = draw(st.sampled_from([9, 10, 11]))
    return TypedValue.time_(f"+{y:04d}-{m:02d}-{d:02d}T00:00:00Z", prec)


quantities = st.builds(
    lambda a, u: TypedValue.quantity_(Decimal(a).scaleb(-2), u),
    st.integers(0, 10**7), st.sampled_from(["1", "Q11573", "Q174728", "Q712226"]))
strings = st.text(alphabet="abcXYZ é-", min_size=1, max_size=8).map(TypedValue.string_)
coords = st.builds(lambda a, b: TypedValue.coordinate_(Decimal(a).scaleb(-3), Decimal(b).scaleb(-3)),
                   st.integers(-90000, 90000), st.integers(-180000, 180000))
typed_values = st.one_of(qids.map(TypedValue.entity_), times(), quantities, strings, coords,
                         st.just(TypedValue(ValueKind.NOVALUE)), st.just(TypedValue(ValueKind.SOMEVALUE)))
qualifier_lists = st.lists(st.tuples(pids, typed_values), max_size=6)


@st.composite
def statements(draw, subject=None):
    return FactStatement(
        statement_id=draw(st.uuids()).hex,
        subject=subject or draw(qids),
        property=draw(pids),
        value=draw(typed_values),
        qualifiers=draw(qualifier_lists),
        rank=draw(st.sampled_from(list(Rank))),
        references=[{}] * draw(st.integers(0, 4)),
    )
