"""Completion rate, success index and robustness index.

SI is reported on the 0-100 scale. RI is computed on SI fractions and
reported as a percentage, which keeps it inside [0, 100].
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

from .refengine import validate_raw
from .rules import Rule, Schema, TriState
from .testgen import GeneratedTestSet, GenerationRecord

TEST_TYPES = tuple(TriState)


def completion_rate(em: int, t_expected: int) -> float:
    if t_expected <= 0:
        raise ValueError("T_expected must be >= 1")
    if not 0 <= em <= t_expected:
        raise ValueError("#EM must lie in [0, T_expected]")
    return em / t_expected


def success_index(observed: int, true: int, t_expected: int) -> float:
    if t_expected <= 0:
        raise ValueError("T_expected must be >= 1")
    if not 0 <= true <= observed <= t_expected:
        raise ValueError("need 0 <= #True <= #Observed <= T_expected")
    distance = math.hypot(t_expected - observed, t_expected - true)
    return (1 - distance / (t_expected * math.sqrt(2))) * 100


def robustness_index(si_original: float, si_mutated: Sequence[float]) -> float:
    """SI values as fractions in [0, 1]."""
    if not si_mutated:
        raise ValueError("robustness index needs at least one mutant")
    return 1 - sum(abs(si_original - m) for m in si_mutated) / len(si_mutated)


@dataclass(frozen=True)
class GenerationTally:
    rule_key: str
    test_type: TriState
    t_expected: int
    em: int
    observed: int
    true: int

    def __post_init__(self) -> None:
        if not (0 <= self.true <= self.observed <= self.t_expected and 0 <= self.em <= self.t_expected):
            raise ValueError(f"inconsistent tally {self}")

    @property
    def cr(self) -> float:
        return completion_rate(self.em, self.t_expected)

    @property
    def si(self) -> float:
        return success_index(self.observed, self.true, self.t_expected)


def tallies(records: Iterable[GenerationRecord], rules: Sequence[Rule], schema: Schema) -> dict[tuple[str, TriState], GenerationTally]:
    """Per (rule, test type): every repetition counts towards T; an EM
    repetition is observed for each type, and true when the reference engine
    puts that slot's case in the intended category."""
    by_key = {r.key: r for r in rules}
    reps: dict[str, int] = defaultdict(int)
    em: dict[str, int] = defaultdict(int)
    true: dict[tuple[str, TriState], int] = defaultdict(int)
    for g in records:
        key = g.rule_key
        if key not in by_key:
            raise KeyError(f"generation for unknown rule {key!r}")
        reps[key] += 1
        if not isinstance(g.outcome, GeneratedTestSet):
            continue
        em[key] += 1
        for t in TEST_TYPES:
            if validate_raw(by_key[key], g.outcome.case(t), schema).result is t:
                true[(key, t)] += 1
    return {
        (key, t): GenerationTally(key, t, reps[key], em[key], em[key], true[(key, t)])
        for key in reps
        for t in TEST_TYPES
    }


@dataclass(frozen=True)
class MetricRow:
    provider: str
    rule_key: str
    test_type: TriState
    cr: float
    si: float
    ri: float | None  # percent
    n_rt: int
    t_infer: float

    def values(self) -> dict[str, float | None]:
        return {"CR": self.cr, "SI": self.si, "RI": self.ri, "t_infer": self.t_infer}


def compute_metrics(
    provider: str,
    rules: Sequence[Rule],
    mutants: Sequence[Rule],
    mutant_sources: Mapping[str, str],
    records: Sequence[GenerationRecord],
    schema: Schema,
) -> list[MetricRow]:
    """One row per (original rule, test type). Mutants only feed RI."""
    all_rules = list(rules) + list(mutants)
    tally = tallies(records, all_rules, schema)
    latency: dict[str, list[float]] = defaultdict(list)
    for g in records:
        latency[g.rule_key].append(g.latency)
    children: dict[str, list[str]] = defaultdict(list)
    for m in mutants:
        if (m.key, TriState.PASS) in tally:
            children[mutant_sources[m.key]].append(m.key)

    rows = []
    for rule in rules:
        for t in TEST_TYPES:
            base = tally.get((rule.key, t))
            if base is None:
                continue
            kids = children.get(rule.key, [])
            ri = None
            if kids:
                ri = 100 * robustness_index(base.si / 100, [tally[(k, t)].si / 100 for k in kids])
            lat = latency[rule.key]
            rows.append(MetricRow(provider, rule.key, t, base.cr, base.si, ri, len(kids), sum(lat) / len(lat)))
    return rows


CSV_COLUMNS = ("provider", "rule", "testType", "CR", "SI", "RI", "n_rt", "t_infer")


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(round(x, 10))


def to_csv(rows: Iterable[MetricRow], latency: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.provider, r.rule_key, r.test_type.value, _fmt(r.cr), _fmt(r.si), _fmt(r.ri), r.n_rt, _fmt(r.t_infer) if latency else ""])
    return buf.getvalue()


def from_csv(text: str) -> list[MetricRow]:
    def num(s: str) -> float | None:
        return float(s) if s != "" else None

    return [
        MetricRow(d["provider"], d["rule"], TriState(d["testType"]), float(d["CR"]), float(d["SI"]), num(d["RI"]), int(d["n_rt"]), num(d["t_infer"]) or 0.0)
        for d in csv.DictReader(io.StringIO(text))
    ]


def metric_samples(rows: Iterable[MetricRow], metric: str) -> dict[str, list[float]]:
    """Observations per provider for ``CR``, ``t_infer`` or ``SI_pass`` style names.

    CR and t_infer are per rule, so only one test type contributes them.
    """
    name, _, suffix = metric.partition("_")
    if metric in ("CR", "t_infer"):
        name, want = metric, TriState.PASS
    elif name in ("SI", "RI") and suffix:
        want = {"pass": TriState.PASS, "fail": TriState.FAIL, "notapplied": TriState.NOT_APPLIED}.get(suffix.lower())
        if want is None:
            raise ValueError(f"unknown test type in metric {metric!r}")
    else:
        raise ValueError(f"unknown metric {metric!r}; use CR, t_infer, SI_<type> or RI_<type>")
    out: dict[str, list[float]] = defaultdict(list)
    for r in rows:
        if r.test_type is want:
            v = r.values()[name]
            if v is not None:
                out[r.provider].append(v)
    return dict(out)


METRIC_NAMES = ("CR", "SI_pass", "SI_fail", "SI_notapplied", "RI_pass", "RI_fail", "RI_notapplied", "t_infer")


def cross_check(tally: Mapping[tuple[str, TriState], GenerationTally], diff_records: Iterable) -> list[str]:
    """Disagreements between #True and the reference outcomes stored in a diff run."""
    seen: dict[tuple[str, TriState], int] = defaultdict(int)
    for d in diff_records:
        if d.ref.result is d.test_type:
            seen[(d.rule_key, d.test_type)] += 1
    problems = []
    for (key, t), n in sorted(seen.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        expected = tally[(key, t)].true if (key, t) in tally else None
        if expected != n:
            problems.append(f"{key} {t.value}: #True {expected} vs {n} in diff records")
    return problems
