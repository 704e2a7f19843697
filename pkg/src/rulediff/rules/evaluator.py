"""Two-valued evaluation and tri-state categorization of rules."""

from __future__ import annotations

import datetime as dt
import operator
from enum import Enum
from typing import Mapping

from .ast import And, Comparison, Implies, Inclusion, Literal, Node, Not, Or, StringPredicate, Substring, Var
from .values import Value


class EvalError(Exception):
    pass


class TriState(str, Enum):
    PASS = "Pass"
    FAIL = "Fail"
    NOT_APPLIED = "NotApplied"


_CMP = {
    "=": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


def _literal_value(lit: Literal) -> Value:
    if lit.kind == "date":
        try:
            return lit.as_date()
        except ValueError:
            raise EvalError(f"malformed date literal {lit.value!r}") from None
    return lit.value


def _family(v: Value) -> str:
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, (int, float)):
        return "number"
    if isinstance(v, str):
        return "text"
    if isinstance(v, dt.date):
        return "date"
    return type(v).__name__


def _term(term: Node, record: Mapping[str, Value]) -> Value:
    if isinstance(term, Var):
        return record.get(term.name)
    if isinstance(term, Literal):
        return _literal_value(term)
    if isinstance(term, Substring):
        s = record.get(term.var.name)
        if s is None:
            return None
        if not isinstance(s, str):
            raise EvalError(f"substring on non-text value {s!r}")
        i, j = term.start, term.end
        if i < 1 or j < i or j > len(s):
            raise EvalError(f"substring({term.var.name}, {i}, {j}) out of range for length {len(s)}")
        return s[i - 1 : j]
    raise EvalError(f"not a term: {term!r}")


def _check_comparable(a: Value, b: Value) -> None:
    if _family(a) != _family(b):
        raise EvalError(f"cannot compare {a!r} with {b!r}")


def evaluate(expr: Node, record: Mapping[str, Value]) -> bool:
    """Evaluate with plain boolean logic. Absent variables are Null;
    any atom with a Null operand is false."""
    if isinstance(expr, Implies):
        return (not evaluate(expr.left, record)) or evaluate(expr.right, record)
    if isinstance(expr, Or):
        return evaluate(expr.left, record) or evaluate(expr.right, record)
    if isinstance(expr, And):
        return evaluate(expr.left, record) and evaluate(expr.right, record)
    if isinstance(expr, Not):
        return not evaluate(expr.operand, record)
    if isinstance(expr, Comparison):
        a, b = _term(expr.left, record), _term(expr.right, record)
        if a is None or b is None:
            return False
        _check_comparable(a, b)
        return _CMP[expr.op](a, b)
    if isinstance(expr, Inclusion):
        a = _term(expr.term, record)
        if a is None:
            return False
        items = [_literal_value(i) for i in expr.items]
        for item in items:
            _check_comparable(a, item)
        hit = a in items
        return hit if expr.op == "in" else not hit
    if isinstance(expr, StringPredicate):
        a = _term(expr.term, record)
        if a is None:
            return False
        if not isinstance(a, str):
            raise EvalError(f"{expr.op} on non-text value {a!r}")
        lit = str(expr.literal.value)
        return a.startswith(lit) if expr.op == "startswith" else a.endswith(lit)
    raise EvalError(f"not a boolean expression: {expr!r}")


def categorize(expr: Node, record: Mapping[str, Value]) -> TriState:
    if isinstance(expr, Implies):
        if not evaluate(expr.left, record):
            return TriState.NOT_APPLIED
        return TriState.PASS if evaluate(expr.right, record) else TriState.FAIL
    return TriState.PASS if evaluate(expr, record) else TriState.FAIL
