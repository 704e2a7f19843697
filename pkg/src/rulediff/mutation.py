"""First-order rule mutation: eight operators, applied one site at a time."""

from __future__ import annotations

import calendar
import datetime as dt
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .rules import (
    And,
    Comparison,
    Expr,
    Implies,
    Inclusion,
    Literal,
    Node,
    Or,
    Path,
    Rule,
    StringPredicate,
    Substring,
    walk,
)
from .rules.ast import get_at, replace_at


class MutationOperator(str, Enum):
    ACO = "ACO"  # alter comparison operator
    AD = "AD"  # alter date
    CO = "CO"  # change and/or
    NI = "NI"  # negate (in)equality
    RI = "RI"  # reverse inclusion
    RSE = "RSE"  # replace startswith/endswith
    SR = "SR"  # swap rule (implies operands)
    SSI = "SSI"  # swap substring indices


_ACO = {">": "<", "<": ">", ">=": "<=", "<=": ">="}
_NI = {"=": "!=", "!=": "="}
_RI = {"in": "notIn", "notIn": "in"}
_RSE = {"startswith": "endswith", "endswith": "startswith"}

AD_VARIANTS = ("+1y", "-1y", "+1m", "-1m", "+1d", "-1d")


class MutationError(ValueError):
    pass


@dataclass(frozen=True)
class Mutant:
    source_id: str
    source_version: int
    operator: MutationOperator
    site: Path
    site_index: int
    variant: str | None
    expression: Expr

    @property
    def id(self) -> str:
        suffix = f"#{self.operator.value}-{self.site_index}"
        if self.variant:
            suffix += f"-{self.variant}"
        return self.source_id + suffix

    @property
    def source_key(self) -> str:
        return f"{self.source_id}/{self.source_version}"

    def as_rule(self, active: bool = True) -> Rule:
        return Rule(self.id, self.source_version, self.expression, active)


def _applicable(op: MutationOperator, node: Node) -> bool:
    if op is MutationOperator.ACO:
        return isinstance(node, Comparison) and node.op in _ACO
    if op is MutationOperator.AD:
        return isinstance(node, Literal) and node.kind == "date"
    if op is MutationOperator.CO:
        return isinstance(node, (And, Or))
    if op is MutationOperator.NI:
        return isinstance(node, Comparison) and node.op in _NI
    if op is MutationOperator.RI:
        return isinstance(node, Inclusion)
    if op is MutationOperator.RSE:
        return isinstance(node, StringPredicate)
    if op is MutationOperator.SR:
        return isinstance(node, Implies)
    if op is MutationOperator.SSI:
        # equal indices would swap to an identical expression
        return isinstance(node, Substring) and node.start != node.end
    raise MutationError(f"unknown operator {op!r}")


def sites(expr: Expr, op: MutationOperator) -> list[Path]:
    """Every location where ``op`` applies, in pre-order."""
    return [path for path, node in walk(expr) if _applicable(op, node)]


def variants(op: MutationOperator) -> tuple[str | None, ...]:
    return AD_VARIANTS if op is MutationOperator.AD else (None,)


def _add_months(d: dt.date, months: int) -> dt.date:
    total = d.year * 12 + (d.month - 1) + months
    year, month = divmod(total, 12)
    month += 1
    if not dt.MINYEAR <= year <= dt.MAXYEAR:
        raise MutationError(f"date {d} out of range after shift")
    day = min(d.day, calendar.monthrange(year, month)[1])
    return dt.date(year, month, day)


def shift_date(d: dt.date, variant: str) -> dt.date:
    """Calendar shift; month/year shifts clamp to the target month's last day."""
    sign = 1 if variant[0] == "+" else -1
    unit = variant[-1]
    if unit == "y":
        return _add_months(d, 12 * sign)
    if unit == "m":
        return _add_months(d, sign)
    if unit == "d":
        try:
            return d + dt.timedelta(days=sign)
        except OverflowError:
            raise MutationError(f"date {d} out of range after shift") from None
    raise MutationError(f"unknown AD variant {variant!r}")


def rewrite(node: Node, op: MutationOperator, variant: str | None = None) -> Node:
    """Apply ``op`` to a single applicable node."""
    if not _applicable(op, node):
        raise MutationError(f"{op.value} does not apply to {type(node).__name__}")
    if op is MutationOperator.ACO:
        return Comparison(_ACO[node.op], node.left, node.right)
    if op is MutationOperator.NI:
        return Comparison(_NI[node.op], node.left, node.right)
    if op is MutationOperator.CO:
        return (Or if isinstance(node, And) else And)(node.left, node.right)
    if op is MutationOperator.RI:
        return Inclusion(_RI[node.op], node.term, node.items)
    if op is MutationOperator.RSE:
        return StringPredicate(_RSE[node.op], node.term, node.literal)
    if op is MutationOperator.SR:
        return Implies(node.right, node.left)
    if op is MutationOperator.SSI:
        return Substring(node.var, node.end, node.start)
    if op is MutationOperator.AD:
        if variant not in AD_VARIANTS:
            raise MutationError(f"AD needs one of {AD_VARIANTS}, got {variant!r}")
        try:
            original = node.as_date()
        except ValueError:
            raise MutationError(f"malformed date literal {node.value!r}") from None
        return Literal("date", shift_date(original, variant).isoformat())
    raise MutationError(f"unknown operator {op!r}")


def apply(rule: Rule, op: MutationOperator, site: Path, variant: str | None = None) -> Mutant:
    op = MutationOperator(op)
    site = tuple(site)
    all_sites = sites(rule.expression, op)
    if site not in all_sites:
        raise MutationError(f"{op.value} does not apply at site {site} of {rule.key}")
    if variant not in variants(op):
        raise MutationError(f"invalid variant {variant!r} for {op.value}")
    new_node = rewrite(get_at(rule.expression, site), op, variant)
    expr = replace_at(rule.expression, site, new_node)
    return Mutant(rule.id, rule.version, op, site, all_sites.index(site), variant, expr)


def mutate_all(rules: Iterable[Rule]) -> list[Mutant]:
    out: list[Mutant] = []
    for rule in rules:
        for op in MutationOperator:
            for site in sites(rule.expression, op):
                for variant in variants(op):
                    out.append(apply(rule, op, site, variant))
    return out


def site_counts(rules: Iterable[Rule]) -> dict[str, dict[str, int]]:
    """Per rule key, the number of sites per operator."""
    return {
        r.key: {op.value: len(sites(r.expression, op)) for op in MutationOperator}
        for r in rules
    }


def mutant_map(mutants: Iterable[Mutant]) -> dict[str, str]:
    """Mutant rule key -> source rule key."""
    return {f"{m.id}/{m.source_version}": m.source_key for m in mutants}
