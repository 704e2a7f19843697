"""Static checks of rule ASTs against a schema."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

from .ast import Comparison, Inclusion, Literal, Node, Path, StringPredicate, Substring, Var, walk
from .values import Schema

_NUMERIC = {"integer", "decimal"}


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # unknown-variable | type-mismatch | bad-substring | bad-literal
    message: str
    path: Path = ()


def _compatible(a: str, b: str) -> bool:
    return a == b or (a in _NUMERIC and b in _NUMERIC)


def _term_type(term: Node, schema: Schema) -> str | None:
    if isinstance(term, Var):
        return schema.get(term.name)
    if isinstance(term, Literal):
        return term.kind
    if isinstance(term, Substring):
        return "text"
    return None


def typecheck(expr: Node, schema: Schema) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    for path, node in walk(expr):
        if isinstance(node, Var) and node.name not in schema:
            diags.append(Diagnostic("unknown-variable", f"unknown variable {node.name!r}", path))
        elif isinstance(node, Literal) and node.kind == "date":
            try:
                dt.date.fromisoformat(str(node.value))
            except ValueError:
                diags.append(Diagnostic("bad-literal", f"malformed date literal {node.value!r}", path))
        elif isinstance(node, Substring):
            vtype = schema.get(node.var.name)
            if vtype is not None and vtype != "text":
                diags.append(Diagnostic("bad-substring", f"substring on {vtype} variable {node.var.name!r}", path))
        elif isinstance(node, Comparison):
            lt, rt = _term_type(node.left, schema), _term_type(node.right, schema)
            if lt and rt and not _compatible(lt, rt):
                diags.append(Diagnostic("type-mismatch", f"cannot compare {lt} {node.op} {rt}", path))
        elif isinstance(node, Inclusion):
            tt = _term_type(node.term, schema)
            for item in node.items:
                if tt and not _compatible(tt, item.kind):
                    diags.append(Diagnostic("type-mismatch", f"{item.kind} item in list for {tt} operand", path))
        elif isinstance(node, StringPredicate):
            tt = _term_type(node.term, schema)
            if tt and tt != "text":
                diags.append(Diagnostic("type-mismatch", f"{node.op} on {tt} operand", path))
    return diags
