"""Synthetic rule corpus, schema and baseline template, plus brute-force test oracles."""

from __future__ import annotations

import datetime as dt
import itertools
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .rules import (
    And,
    Comparison,
    EvalError,
    Expr,
    Implies,
    Inclusion,
    Literal,
    Or,
    Rule,
    Schema,
    StringPredicate,
    Substring,
    TriState,
    Var,
    categorize,
    dump_rules,
    to_json_record,
    typecheck,
    variables,
    walk,
)
from .mutation import AD_VARIANTS, shift_date
from .rules.ast import replace_at
from .rules.values import coerce_record
from .testgen.parsing import GeneratedTestSet

FRESH_CHAR = "Z"
MAX_SEARCH = 2_000_000

DEFAULT_SCHEMA: Schema = {
    "topo": "text",
    "morfo": "text",
    "icd10": "text",
    "ds": "integer",
    "basis": "integer",
    "laterality": "integer",
    "age": "integer",
    "tumorSize": "decimal",
    "diagDate": "date",
    "surgeryDate": "date",
    "birthDate": "date",
}

FEATURES = ("inclusion", "string_predicate", "substring", "date_comparison", "pre_aggregation")


class InfeasibleCorpus(ValueError):
    pass


class Unsatisfiable(ValueError):
    def __init__(self, rule_key: str, intents: Iterable[TriState]):
        self.intents = tuple(intents)
        names = ", ".join(t.value for t in self.intents)
        super().__init__(f"rule {rule_key}: no witness for {names}")


# -- witness search -----------------------------------------------------------


def _numeric_candidates(lits: list[float | int], integer: bool) -> list[Any]:
    out: list[Any] = []
    for v in lits:
        for c in (v, v - 1, v + 1):
            if integer:
                for r in {math.floor(c), math.ceil(c)}:
                    out.append(int(r))
            else:
                out.append(c)
    return out


_ATOMS = (Comparison, Inclusion, StringPredicate)


def _related_literals(expr: Expr, name: str) -> list[Literal]:
    """Literals from atoms mentioning ``name``, following variable-to-variable
    comparisons one step."""
    atoms = [n for _, n in walk(expr) if isinstance(n, _ATOMS)]
    names_in = {id(a): set(variables(a)) for a in atoms}
    linked = {name}
    for a in atoms:
        if name in names_in[id(a)]:
            linked |= names_in[id(a)]
    out: list[Literal] = []
    for a in atoms:
        if names_in[id(a)] & linked:
            out += [n for _, n in walk(a) if isinstance(n, Literal)]
    return out


def value_domain(expr: Expr, name: str, vtype: str) -> list[Any]:
    """Finite candidate values for one variable: literals near it with their
    neighbours, string-shape variants, a fresh value, and Null (last)."""
    lits = _related_literals(expr, name) or [n for _, n in walk(expr) if isinstance(n, Literal)]
    cands: list[Any] = []
    if vtype in ("integer", "decimal"):
        nums = [l.value for l in lits if l.kind in ("integer", "decimal")] or [0]
        cands = _numeric_candidates(nums, vtype == "integer")
    elif vtype == "date":
        dates = []
        for l in lits:
            if l.kind == "date":
                try:
                    dates.append(l.as_date())
                except ValueError:
                    pass
        for d in dates or [dt.date(2020, 1, 1)]:
            cands += [d, d - dt.timedelta(days=1), d + dt.timedelta(days=1)]
    elif vtype == "text":
        texts = [str(l.value) for l in lits if l.kind == "text"]
        max_end = max(
            [n.end for _, n in walk(expr) if isinstance(n, Substring) and n.var.name == name] or [0]
        )
        width = max(3, max_end)
        cands = list(texts)
        for _, n in walk(expr):
            if isinstance(n, StringPredicate) and n.term == Var(name):
                lit = str(n.literal.value)
                cands += [lit + FRESH_CHAR, FRESH_CHAR + lit]
            if isinstance(n, Substring) and n.var.name == name:
                for t in texts:
                    if len(t) == n.end - n.start + 1:
                        padded = FRESH_CHAR * (n.start - 1) + t
                        cands.append(padded.ljust(width, FRESH_CHAR))
        cands.append(FRESH_CHAR * width)
    cands.append(None)
    seen, out = set(), []
    for c in cands:
        k = (type(c).__name__, c)
        if k not in seen:
            seen.add(k)
            out.append(c)
    return out


def find_witnesses(expr: Expr, schema: Schema) -> dict[TriState, dict[str, Any]]:
    """First record (in enumeration order) reaching each outcome."""
    names = variables(expr)
    domains = [value_domain(expr, n, schema[n]) for n in names]
    size = math.prod(len(d) for d in domains)
    if size > MAX_SEARCH:
        raise ValueError(f"witness search space too large ({size})")
    found: dict[TriState, dict[str, Any]] = {}
    for combo in itertools.product(*domains):
        record = dict(zip(names, combo))
        try:
            outcome = categorize(expr, record)
        except EvalError:
            continue
        if outcome not in found:
            found[outcome] = record
            if len(found) == 3:
                break
    return found


def oracle_tests(rule: Rule, schema: Schema, confidence: float = 1.0) -> GeneratedTestSet:
    found = find_witnesses(rule.expression, schema)
    missing = [t for t in TriState if t not in found]
    if missing:
        raise Unsatisfiable(rule.key, missing)
    return GeneratedTestSet(
        satisfying_case=to_json_record(found[TriState.PASS]),
        violating_case=to_json_record(found[TriState.FAIL]),
        invalid_case=to_json_record(found[TriState.NOT_APPLIED]),
        confidence_score=confidence,
    )


# -- corpus generation --------------------------------------------------------


@dataclass(frozen=True)
class CorpusSpec:
    count: int = 10
    seed: int = 42
    schema: Schema = field(default_factory=lambda: dict(DEFAULT_SCHEMA))
    min_feature_rules: int = 3
    pre_aggregation_var: str = "ds"


@dataclass
class Corpus:
    rules: list[Rule]
    schema: Schema
    template: dict[str, Any]

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"rules": out / "rules.json", "schema": out / "schema.json", "template": out / "template.json"}
        paths["rules"].write_text(dump_rules(self.rules))
        paths["schema"].write_text(json.dumps(self.schema, indent=2) + "\n")
        paths["template"].write_text(json.dumps(self.template, indent=2) + "\n")
        return paths


_TOPO = ["C50", "C51", "C18", "C34", "C61", "C44", "C19", "C20"]
_MORFO = ["8500", "8140", "8070", "8720", "8010", "8520"]
_ICD = ["C509", "C182", "C341", "C619", "C447", "C209"]


class _RuleBuilder:
    def __init__(self, rng: random.Random, schema: Schema, pre_agg: str):
        self.rng = rng
        self.schema = schema
        self.pre_agg = pre_agg

    def _vars(self, vtype: str, used: set[str]) -> list[str]:
        return [n for n, t in self.schema.items() if t == vtype and n not in used and n != self.pre_agg]

    def _date(self) -> str:
        d = dt.date(2010, 1, 1) + dt.timedelta(days=self.rng.randrange(0, 365 * 12))
        return d.isoformat()

    def _codes(self, name: str) -> list[str]:
        return {"topo": _TOPO, "morfo": _MORFO, "icd10": _ICD}.get(name, _TOPO)

    def atom(self, feature: str, used: set[str]) -> tuple[Expr, set[str]] | None:
        rng = self.rng
        if feature == "pre_aggregation":
            if self.pre_agg in used or self.pre_agg not in self.schema:
                return None
            lits = tuple(Literal("integer", v) for v in sorted(rng.sample(range(1, 8), rng.randint(1, 3))))
            if len(lits) == 1:
                return Comparison(rng.choice(["=", "!="]), Var(self.pre_agg), lits[0]), {self.pre_agg}
            return Inclusion(rng.choice(["in", "notIn"]), Var(self.pre_agg), lits), {self.pre_agg}
        if feature in ("inclusion", "string_predicate", "substring"):
            names = self._vars("text", used)
            if not names:
                return None
            name = rng.choice(names)
            codes = self._codes(name)
            if feature == "inclusion":
                items = tuple(Literal("text", c) for c in sorted(rng.sample(codes, rng.randint(1, 3))))
                return Inclusion(rng.choice(["in", "notIn"]), Var(name), items), {name}
            if feature == "string_predicate":
                code = rng.choice(codes)
                if rng.random() < 0.5:
                    return StringPredicate("startswith", Var(name), Literal("text", code[:2])), {name}
                return StringPredicate("endswith", Var(name), Literal("text", code[-1])), {name}
            code = rng.choice(codes)
            start = rng.randint(1, 2)
            end = rng.randint(start + 1, len(code))
            sub = Substring(Var(name), start, end)
            piece = code[start - 1 : end]
            if rng.random() < 0.6:
                return Comparison(rng.choice(["=", "!="]), sub, Literal("text", piece)), {name}
            other = rng.choice(codes)[start - 1 : end]
            items = tuple(Literal("text", p) for p in sorted({piece, other}))
            return Inclusion("in", sub, items), {name}
        if feature == "date_comparison":
            names = self._vars("date", used)
            if not names:
                return None
            name = rng.choice(names)
            op = rng.choice(["<", "<=", ">", ">="])
            return Comparison(op, Var(name), Literal("date", self._date())), {name}
        if feature == "filler":
            choices = [n for n, t in self.schema.items() if t in ("integer", "decimal") and n not in used and n != self.pre_agg]
            if not choices:
                return None
            name = rng.choice(choices)
            if self.schema[name] == "decimal":
                value = Literal("decimal", round(rng.uniform(0.5, 9.5), 1))
                return Comparison(rng.choice(["<", ">", "<=", ">="]), Var(name), value), {name}
            value = Literal("integer", rng.randint(1, 90))
            return Comparison(rng.choice(["=", "!=", "<", ">", "<=", ">="]), Var(name), value), {name}
        raise ValueError(feature)

    def build(self, features: list[str], n_filler: int, all_and: bool) -> Expr | None:
        # left and right operands get disjoint variables so every outcome is reachable
        wanted = list(features) + ["filler"] * n_filler
        self.rng.shuffle(wanted)
        n_left = math.ceil(len(wanted) / 2) if len(wanted) > 1 else 1
        used: set[str] = set()
        atoms: list[Expr] = []
        for feat in wanted:
            made = self.atom(feat, used)
            if made is None:
                made = self.atom("filler", used)
                if made is None:
                    return None
            atom, names = made
            used |= names
            atoms.append(atom)
        if len(atoms) < 2:
            return None
        left, right = atoms[:n_left], atoms[n_left:]

        def join(parts: list[Expr]) -> Expr:
            expr = parts[0]
            for p in parts[1:]:
                conn = And if all_and or self.rng.random() < 0.7 else Or
                expr = conn(expr, p)
            return expr

        return Implies(join(left), join(right))


def _template(rng: random.Random, rules: list[Rule], schema: Schema, pre_agg: str) -> dict[str, Any]:
    max_end: dict[str, int] = {}
    for r in rules:
        for _, n in walk(r.expression):
            if isinstance(n, Substring):
                max_end[n.var.name] = max(max_end.get(n.var.name, 0), n.end)
    tpl: dict[str, Any] = {}
    for name, vtype in schema.items():
        if vtype == "text":
            width = max(4, max_end.get(name, 0))
            tpl[name] = "T" + "".join(rng.choice("0123456789") for _ in range(width - 1))
        elif vtype == "integer":
            tpl[name] = rng.randint(1, 7) if name == pre_agg else rng.randint(0, 99)
        elif vtype == "decimal":
            tpl[name] = round(rng.uniform(0.1, 9.9), 2)
        else:
            d = dt.date(2005, 1, 1) + dt.timedelta(days=rng.randrange(0, 365 * 15))
            tpl[name] = d.isoformat()
    return tpl


def _vary(rng: random.Random, expr: Expr) -> Expr:
    """A second version: same shape, one literal changed."""
    spots = [(p, n) for p, n in walk(expr) if isinstance(n, Literal) and n.kind in ("integer", "decimal", "date")]
    if not spots:
        return expr
    path, lit = rng.choice(spots)
    if lit.kind == "date":
        new = Literal("date", shift_date(lit.as_date(), rng.choice(AD_VARIANTS[:2])).isoformat())
    elif lit.kind == "integer":
        new = Literal("integer", lit.value + 1)
    else:
        new = Literal("decimal", round(lit.value + 0.5, 2))
    return replace_at(expr, path, new)


def _features_of(expr: Expr, pre_agg: str) -> set[str]:
    feats = set()
    for _, n in walk(expr):
        if isinstance(n, Inclusion):
            feats.add("inclusion")
        if isinstance(n, StringPredicate):
            feats.add("string_predicate")
        if isinstance(n, Substring):
            feats.add("substring")
        if isinstance(n, Literal) and n.kind == "date":
            feats.add("date_comparison")
        if isinstance(n, Var) and n.name == pre_agg:
            feats.add("pre_aggregation")
    return feats


def generate_corpus(spec: CorpusSpec) -> Corpus:
    """Deterministic corpus for ``spec``; every rule is implies-rooted, well
    typed, and has Pass, Fail and NotApplied witnesses."""
    schema = dict(spec.schema)
    if spec.count == 0:
        return Corpus([], schema, {})
    quota = spec.min_feature_rules
    n_multi = math.ceil(quota / 2)
    if spec.count < quota or spec.count < 2 * n_multi + 1:
        raise InfeasibleCorpus(f"{spec.count} rules cannot meet a per-feature quota of {quota}")
    if spec.pre_aggregation_var not in schema:
        raise InfeasibleCorpus(f"pre-aggregation variable {spec.pre_aggregation_var!r} not in schema")
    if sum(t == "date" for t in schema.values()) < 2:
        raise InfeasibleCorpus("schema needs at least two date variables")

    rng = random.Random(spec.seed)
    builder = _RuleBuilder(rng, schema, spec.pre_aggregation_var)
    n_base = spec.count - n_multi
    per_rule = min(len(FEATURES), math.ceil(len(FEATURES) * quota / n_base))

    base: list[Rule] = []
    for i in range(n_base):
        feats = [FEATURES[(i + j) % len(FEATURES)] for j in range(per_rule)]
        for _attempt in range(200):
            # the first rule carries three `and` connectives
            n_filler = max(0, 5 - len(feats)) if i == 0 else rng.randint(1, 2)
            expr = builder.build(feats, n_filler, all_and=(i == 0))
            if expr is None or typecheck(expr, schema):
                continue
            if not _features_of(expr, spec.pre_aggregation_var).issuperset(feats):
                continue
            if len(find_witnesses(expr, schema)) == 3:
                break
        else:
            raise InfeasibleCorpus(f"could not build rule {i} with features {feats}")
        base.append(Rule(f"V{i + 1:02d}", 1, expr))

    rules: list[Rule] = []
    multi_ids = set(r.id for r in rng.sample(base, n_multi))
    for r in base:
        if r.id not in multi_ids:
            rules.append(r)
            continue
        for _attempt in range(50):
            v2 = _vary(rng, r.expression)
            if v2 != r.expression and len(find_witnesses(v2, schema)) == 3:
                break
        else:
            raise InfeasibleCorpus(f"could not derive a second version of {r.id}")
        rules.append(r)
        rules.append(Rule(r.id, 2, v2))

    counts = {f: 0 for f in FEATURES}
    for r in rules:
        for f in _features_of(r.expression, spec.pre_aggregation_var):
            counts[f] += 1
    short = [f for f, c in counts.items() if c < quota]
    if short:
        raise InfeasibleCorpus(f"feature quota not met for {short}")

    template = _template(rng, rules, schema, spec.pre_aggregation_var)
    for r in rules:
        categorize(r.expression, coerce_record(template, schema))
    return Corpus(rules, schema, template)


def rule_features(rules: Iterable[Rule], pre_agg: str = "ds") -> dict[str, set[str]]:
    return {r.key: _features_of(r.expression, pre_agg) for r in rules}
