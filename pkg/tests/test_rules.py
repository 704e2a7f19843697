from __future__ import annotations

import datetime as dt

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rulediff.rules import (
    And,
    Comparison,
    EvalError,
    Implies,
    Inclusion,
    Literal,
    Not,
    Or,
    ParseError,
    Rule,
    TriState,
    Var,
    categorize,
    coerce_record,
    display_labels,
    evaluate,
    parse,
    rules_from_json,
    typecheck,
    unparse,
)
from rulediff.rules.values import CoercionError, parse_date

from strategies import expressions


# -- parser ---------------------------------------------------------------------


def test_parse_implies():
    assert parse("A = 1 implies B = 2") == Implies(
        Comparison("=", Var("A"), Literal("integer", 1)), Comparison("=", Var("B"), Literal("integer", 2))
    )


def test_parse_inclusion():
    assert parse("topo in ['C50','C51']") == Inclusion(
        "in", Var("topo"), (Literal("text", "C50"), Literal("text", "C51"))
    )


def test_incomplete_rule_is_error_at_end():
    with pytest.raises(ParseError) as err:
        parse("A = 1 and")
    assert err.value.line == 1
    assert err.value.column == len("A = 1 and") + 1


@pytest.mark.parametrize("text", ["", "   ", "A =", "(A = 1", "A = 1)", "A in []", "A ~ 1", "implies A = 1"])
def test_malformed(text):
    with pytest.raises(ParseError):
        parse(text)


def test_precedence():
    # not > and > or > implies; implies is right-associative
    e = parse("not A = 1 and B = 2 or C = 3 implies D = 4 implies E = 5")
    assert isinstance(e, Implies)
    assert isinstance(e.right, Implies)
    assert isinstance(e.left, Or)
    assert isinstance(e.left.left, And)
    assert isinstance(e.left.left.left, Not)


def test_literals():
    e = parse("d < date('2020-01-31') and x >= -2.5 and s = 'it\\'s'")
    lits = [n for n in (e.left.left.right, e.left.right.right, e.right.right)]
    assert lits == [Literal("date", "2020-01-31"), Literal("decimal", -2.5), Literal("text", "it's")]


@given(expressions)
def test_parse_unparse_roundtrip(expr):
    assert parse(unparse(expr)) == expr


# -- typecheck ------------------------------------------------------------------


def test_typecheck_ok():
    assert typecheck(parse("d < date('2020-01-01')"), {"d": "date"}) == []


def test_typecheck_mismatch():
    (d,) = typecheck(parse("t < 3"), {"t": "text"})
    assert d.kind == "type-mismatch"


def test_typecheck_unknown_variable():
    (d,) = typecheck(parse("nope = 1"), {"t": "text"})
    assert d.kind == "unknown-variable"


def test_typecheck_numeric_families_mix():
    assert typecheck(parse("n > 1.5"), {"n": "integer"}) == []


# -- evaluation -------------------------------------------------------------------

RULE = parse("A = 1 implies B = 2")


@pytest.mark.parametrize(
    "record,value,category",
    [
        ({"A": 1, "B": 2}, True, TriState.PASS),
        ({"A": 1, "B": 3}, False, TriState.FAIL),
        ({"A": 0, "B": 3}, True, TriState.NOT_APPLIED),
        ({"A": 0}, True, TriState.NOT_APPLIED),
    ],
)
def test_implication(record, value, category):
    assert evaluate(RULE, record) is value
    assert categorize(RULE, record) is category


def test_non_implication_root_never_not_applied():
    e = parse("A = 1")
    assert categorize(e, {"A": 1}) is TriState.PASS
    assert categorize(e, {"A": 2}) is TriState.FAIL
    assert categorize(e, {}) is TriState.FAIL


def test_null_atoms_are_false():
    assert evaluate(parse("A = 1"), {"A": None}) is False
    assert evaluate(parse("A != 1"), {"A": None}) is False
    assert evaluate(parse("A notIn [1]"), {}) is False
    assert evaluate(parse("not A = 1"), {}) is True


def test_substring_one_based_inclusive():
    e = parse("substring(t, 2, 3) = 'bc'")
    assert evaluate(e, {"t": "abcd"})


@pytest.mark.parametrize("record", [{"t": "ab"}, {"t": "abc"}])
def test_substring_bad_indices(record):
    with pytest.raises(EvalError):
        evaluate(parse("substring(t, 5, 2) = 'x'"), record)


def test_comparing_families_is_eval_error():
    with pytest.raises(EvalError):
        evaluate(parse("t < 3"), {"t": "x"})


def test_dates_compare():
    e = parse("d < date('2020-01-01')")
    assert evaluate(e, {"d": dt.date(2019, 12, 31)})
    assert not evaluate(e, {"d": dt.date(2020, 1, 1)})


@given(expressions, expressions, st.dictionaries(st.sampled_from(["a", "b", "code"]), st.integers(0, 2)))
def test_implies_is_not_left_or_right(left, right, record):
    try:
        lhs = evaluate(Implies(left, right), record)
        rhs = evaluate(Or(Not(left), right), record)
    except EvalError:
        return
    assert lhs == rhs


@given(expressions, expressions, st.dictionaries(st.sampled_from(["a", "b", "code"]), st.integers(0, 2)))
def test_categorize_consistent_with_evaluate(left, right, record):
    rule = Implies(left, right)
    try:
        cat = categorize(rule, record)
        l_val, whole = evaluate(left, record), evaluate(rule, record)
    except EvalError:
        return
    assert (cat is TriState.NOT_APPLIED) == (not l_val)
    assert (cat is TriState.FAIL) == (not whole)


# -- values and registry ---------------------------------------------------------


def test_coerce_record():
    schema = {"d": "date", "n": "integer", "x": "decimal", "t": "text"}
    rec = coerce_record({"d": "2020-02-03", "n": 4.0, "x": 1, "t": "a", }, schema)
    assert rec == {"d": dt.date(2020, 2, 3), "n": 4, "x": 1, "t": "a"}
    with pytest.raises(CoercionError):
        coerce_record({"n": "4"}, schema)
    with pytest.raises(CoercionError):
        coerce_record({"zz": 1}, schema)


def test_parse_date_forms():
    assert parse_date("2021-02-01") == parse_date("01-02-2021") == dt.date(2021, 2, 1)
    with pytest.raises(CoercionError):
        parse_date("2021-02-30")


def test_registry_roundtrip_and_duplicates():
    rules = [Rule.from_text("V01", "A = 1", 1), Rule.from_text("V01", "A = 2", 2)]
    again = rules_from_json([r.to_json() for r in rules])
    assert again == rules
    with pytest.raises(ValueError):
        rules_from_json([rules[0].to_json(), rules[0].to_json()])


def test_display_labels():
    labels = display_labels([("V01", 1), ("V01", 2), ("V02", 1)])
    assert labels == {("V01", 1): "V01/1", ("V01", 2): "V01/2", ("V02", 1): "V02"}
