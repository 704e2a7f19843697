"""Hypothesis strategies for rule ASTs."""

from __future__ import annotations

import datetime as dt

from hypothesis import strategies as st

from rulediff.rules import And, Comparison, Implies, Inclusion, Literal, Not, Or, StringPredicate, Substring, Var
from rulediff.rules.ast import COMPARISON_OPS, INCLUSION_OPS, STRING_OPS

names = st.sampled_from(["a", "b", "code", "diagDate", "x_1", "implies_not"])
texts = st.text(alphabet="abcXYZ019 '\\\"-_", max_size=6)
ints = st.integers(-1000, 1000)
decimals = st.floats(-1e4, 1e4, allow_nan=False, allow_infinity=False)
dates = st.dates(dt.date(1900, 1, 1), dt.date(2100, 12, 31)).map(lambda d: d.isoformat())

literals = st.one_of(
    texts.map(lambda s: Literal("text", s)),
    ints.map(lambda i: Literal("integer", i)),
    decimals.map(lambda f: Literal("decimal", f)),
    dates.map(lambda s: Literal("date", s)),
)


@st.composite
def substrings(draw):
    i = draw(st.integers(0, 9))
    j = draw(st.integers(0, 9))
    return Substring(Var(draw(names)), i, j)


terms = st.one_of(names.map(Var), literals, substrings())

atoms = st.one_of(
    st.builds(Comparison, st.sampled_from(COMPARISON_OPS), terms, terms),
    st.builds(Inclusion, st.sampled_from(INCLUSION_OPS), terms, st.lists(literals, min_size=1, max_size=3).map(tuple)),
    st.builds(StringPredicate, st.sampled_from(STRING_OPS), terms, texts.map(lambda s: Literal("text", s))),
)


def _extend(children):
    return st.one_of(
        st.builds(Not, children),
        st.builds(And, children, children),
        st.builds(Or, children, children),
        st.builds(Implies, children, children),
    )


expressions = st.recursive(atoms, _extend, max_leaves=8)
