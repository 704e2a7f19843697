"""Typed AST for rule expressions, plus unparsing and path-based tree access."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Union

COMPARISON_OPS = ("=", "!=", "<", "<=", ">", ">=")
INCLUSION_OPS = ("in", "notIn")
STRING_OPS = ("startswith", "endswith")

LITERAL_KINDS = ("text", "integer", "decimal", "date")


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Literal:
    """A constant. Date literals keep their source text in ``value``."""

    kind: str
    value: str | int | float

    def __post_init__(self) -> None:
        if self.kind not in LITERAL_KINDS:
            raise ValueError(f"unknown literal kind {self.kind!r}")

    def as_date(self) -> dt.date:
        return dt.date.fromisoformat(str(self.value))


@dataclass(frozen=True)
class Substring:
    """``substring(var, start, end)``; 1-based inclusive bounds."""

    var: Var
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start < 0 or self.end < 0:
            raise ValueError("substring indices must be non-negative")


Term = Union[Var, Literal, Substring]


@dataclass(frozen=True)
class Comparison:
    op: str
    left: Term
    right: Term

    def __post_init__(self) -> None:
        if self.op not in COMPARISON_OPS:
            raise ValueError(f"unknown comparison operator {self.op!r}")


@dataclass(frozen=True)
class Inclusion:
    op: str
    term: Term
    items: tuple[Literal, ...]

    def __post_init__(self) -> None:
        if self.op not in INCLUSION_OPS:
            raise ValueError(f"unknown inclusion operator {self.op!r}")
        if not self.items:
            raise ValueError("inclusion list must be non-empty")


@dataclass(frozen=True)
class StringPredicate:
    op: str
    term: Term
    literal: Literal

    def __post_init__(self) -> None:
        if self.op not in STRING_OPS:
            raise ValueError(f"unknown string predicate {self.op!r}")


@dataclass(frozen=True)
class Not:
    operand: Expr


@dataclass(frozen=True)
class And:
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Or:
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Implies:
    left: Expr
    right: Expr


Expr = Union[Implies, Or, And, Not, Comparison, Inclusion, StringPredicate]
Node = Union[Expr, Var, Literal, Substring]
Path = tuple[int, ...]


def children(node: Node) -> tuple[Node, ...]:
    """Child nodes in a fixed order; paths index into this tuple."""
    if isinstance(node, (Implies, Or, And, Comparison)):
        return (node.left, node.right)
    if isinstance(node, Not):
        return (node.operand,)
    if isinstance(node, Inclusion):
        return (node.term, *node.items)
    if isinstance(node, StringPredicate):
        return (node.term, node.literal)
    if isinstance(node, Substring):
        return (node.var,)
    return ()


def with_children(node: Node, kids: tuple[Node, ...]) -> Node:
    if isinstance(node, (Implies, Or, And)):
        return type(node)(kids[0], kids[1])
    if isinstance(node, Comparison):
        return Comparison(node.op, kids[0], kids[1])
    if isinstance(node, Not):
        return Not(kids[0])
    if isinstance(node, Inclusion):
        return Inclusion(node.op, kids[0], tuple(kids[1:]))
    if isinstance(node, StringPredicate):
        return StringPredicate(node.op, kids[0], kids[1])
    if isinstance(node, Substring):
        return Substring(kids[0], node.start, node.end)
    return node


def walk(node: Node, path: Path = ()):
    """Yield ``(path, node)`` pairs in pre-order."""
    yield path, node
    for i, child in enumerate(children(node)):
        yield from walk(child, path + (i,))


def get_at(node: Node, path: Path) -> Node:
    for i in path:
        node = children(node)[i]
    return node


def replace_at(node: Node, path: Path, new: Node) -> Node:
    if not path:
        return new
    kids = list(children(node))
    kids[path[0]] = replace_at(kids[path[0]], path[1:], new)
    return with_children(node, tuple(kids))


def variables(node: Node) -> list[str]:
    """Variable names in first-occurrence order."""
    seen: dict[str, None] = {}
    for _, n in walk(node):
        if isinstance(n, Var):
            seen.setdefault(n.name)
    return list(seen)


def literals(node: Node) -> list[Literal]:
    return [n for _, n in walk(node) if isinstance(n, Literal)]


# -- unparsing ---------------------------------------------------------------

_PREC = {Implies: 1, Or: 2, And: 3, Not: 4}
_ATOM_PREC = 5


def _prec(node: Node) -> int:
    return _PREC.get(type(node), _ATOM_PREC)


def _quote(text: str) -> str:
    return "'" + text.replace("\\", "\\\\").replace("'", "\\'") + "'"


def unparse_literal(lit: Literal) -> str:
    if lit.kind == "text":
        return _quote(str(lit.value))
    if lit.kind == "date":
        return f"date({_quote(str(lit.value))})"
    if lit.kind == "decimal":
        text = repr(float(lit.value))
        return text if ("." in text or "e" in text or "n" in text) else text + ".0"
    return str(lit.value)


def _term(term: Node) -> str:
    if isinstance(term, Var):
        return term.name
    if isinstance(term, Literal):
        return unparse_literal(term)
    if isinstance(term, Substring):
        return f"substring({term.var.name}, {term.start}, {term.end})"
    raise TypeError(f"not a term: {term!r}")


def unparse(node: Node) -> str:
    """Render an AST back to source text that parses to the same tree."""
    if isinstance(node, (Var, Literal, Substring)):
        return _term(node)
    if isinstance(node, Comparison):
        return f"{_term(node.left)} {node.op} {_term(node.right)}"
    if isinstance(node, Inclusion):
        items = ", ".join(unparse_literal(i) for i in node.items)
        return f"{_term(node.term)} {node.op} [{items}]"
    if isinstance(node, StringPredicate):
        return f"{node.op}({_term(node.term)}, {unparse_literal(node.literal)})"
    if isinstance(node, Not):
        inner = unparse(node.operand)
        if _prec(node.operand) < _PREC[Not]:
            inner = f"({inner})"
        return f"not {inner}"

    p = _prec(node)
    left, right = unparse(node.left), unparse(node.right)
    if isinstance(node, Implies):
        # right-associative
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < p:
            right = f"({right})"
    else:
        # left-associative
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
    word = {Implies: "implies", Or: "or", And: "and"}[type(node)]
    return f"{left} {word} {right}"
