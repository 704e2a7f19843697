from .ast import (
    And,
    Comparison,
    Expr,
    Implies,
    Inclusion,
    Literal,
    Node,
    Not,
    Or,
    Path,
    StringPredicate,
    Substring,
    Var,
    unparse,
    variables,
    walk,
)
from .evaluator import EvalError, TriState, categorize, evaluate
from .parser import ParseError, parse
from .registry import Rule, display_labels, dump_rules, load_rules, load_schema, rule_key, rules_from_json
from .typecheck import Diagnostic, typecheck
from .values import CoercionError, Record, Schema, coerce_record, parse_date, to_json_record

__all__ = [
    "And", "Comparison", "Expr", "Implies", "Inclusion", "Literal", "Node", "Not", "Or", "Path",
    "StringPredicate", "Substring", "Var", "unparse", "variables", "walk",
    "EvalError", "TriState", "categorize", "evaluate",
    "ParseError", "parse",
    "Rule", "display_labels", "dump_rules", "load_rules", "load_schema", "rule_key", "rules_from_json",
    "Diagnostic", "typecheck",
    "CoercionError", "Record", "Schema", "coerce_record", "parse_date", "to_json_record",
]
