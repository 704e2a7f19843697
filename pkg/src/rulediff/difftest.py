"""Differential execution of generated tests and Match/Mismatch accounting.

Each test runs twice: bare against the reference engine, and embedded in a
full message against the rule service. Outcomes are compared one-to-one on
Pass/Fail/NotApplied; every other pairing is a mismatch filed under the
service's result category. Per category a rule is a mismatch if any of its
executions mismatched there, and a match otherwise.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .refengine import RefOutcome, validate_raw
from .rules import Rule, Schema, TriState, display_labels
from .service import CATEGORY_ORDER, ServiceClient, ServiceResult, ServiceTransportError
from .testgen import GeneratedTestSet, GenerationRecord

log = logging.getLogger(__name__)

_TYPE_ORDER = {t: i for i, t in enumerate(TriState)}


class EmbedError(ValueError):
    pass


def embed(test: Mapping[str, Any], template: Mapping[str, Any], schema: Schema) -> dict[str, Any]:
    """The template with the test's variables (nulls included) written over it."""
    unknown = sorted(set(test) - set(schema))
    if unknown:
        raise EmbedError(f"test uses variables outside the schema: {', '.join(unknown)}")
    message = dict(template)
    message.update(test)
    return message


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class

    rule_key: str
    test_type: TriState
    rep: int
    record: Mapping[str, Any]
    provider: str = ""


def cases_from_generations(records: Iterable[GenerationRecord]) -> list[TestCase]:
    """Three cases per exact-match generation; non-EM repetitions have none."""
    out = []
    for g in records:
        if isinstance(g.outcome, GeneratedTestSet):
            out.extend(TestCase(g.rule_key, t, g.rep, g.outcome.case(t), g.provider) for t in TriState)
    return out


def cases_from_tests(tests: Mapping[str, GeneratedTestSet], provider: str = "oracle") -> list[TestCase]:
    return [TestCase(key, t, 1, ts.case(t), provider) for key, ts in tests.items() for t in TriState]


def ref_matches(ref: RefOutcome, service: ServiceResult) -> bool:
    return ref.ok and ServiceResult.from_tristate(ref.result) is service


@dataclass(frozen=True)
class DiffRecord:
    rule_id: str
    version: int
    test_type: TriState
    rep: int
    ref: RefOutcome
    service: ServiceResult
    provider: str = ""

    @property
    def rule_key(self) -> str:
        return f"{self.rule_id}/{self.version}"

    @property
    def match(self) -> bool:
        return ref_matches(self.ref, self.service)

    @property
    def category(self) -> ServiceResult | None:
        """Mismatch category, which is the service outcome; None on a match."""
        return None if self.match else self.service

    def sort_key(self) -> tuple:
        return (self.provider, self.rule_id, self.version, _TYPE_ORDER[self.test_type], self.rep)

    def to_json(self) -> dict[str, Any]:
        return {
            "provider": self.provider,
            "rule_id": self.rule_id,
            "version": self.version,
            "test_type": self.test_type.value,
            "rep": self.rep,
            "ref": self.ref.to_json(),
            "service": self.service.value,
            "verdict": "Match" if self.match else "Mismatch",
            "category": None if self.match else self.service.value,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> DiffRecord:
        return cls(
            data["rule_id"], int(data["version"]), TriState(data["test_type"]), int(data["rep"]),
            RefOutcome.from_json(data["ref"]), ServiceResult(data["service"]), data.get("provider", ""),
        )


def run_pair(
    rule: Rule,
    test: TestCase,
    template: Mapping[str, Any],
    schema: Schema,
    service: ServiceClient,
) -> DiffRecord:
    ref = validate_raw(rule, test.record, schema)
    try:
        message = embed(test.record, template, schema)
    except EmbedError:
        # the service cannot be asked about a message the schema rejects
        observed = ServiceResult.HTTP_500
    else:
        observed = service.validate(message).result_for(rule.key)
    return DiffRecord(rule.id, rule.version, test.test_type, test.rep, ref, observed, test.provider)


@dataclass
class DiffRun:
    records: list[DiffRecord]
    infra_failures: list[str]


def run_tests(
    cases: Sequence[TestCase],
    rules: Sequence[Rule],
    template: Mapping[str, Any],
    schema: Schema,
    service: ServiceClient,
    workers: int = 1,
) -> DiffRun:
    by_key = {r.key: r for r in rules}
    missing = sorted({c.rule_key for c in cases} - set(by_key))
    if missing:
        raise KeyError(f"tests reference unknown rules: {', '.join(missing)}")

    def run(case: TestCase) -> DiffRecord | str:
        try:
            return run_pair(by_key[case.rule_key], case, template, schema, service)
        except ServiceTransportError as exc:
            msg = f"{case.rule_key} {case.test_type.value} rep {case.rep}: {exc}"
            log.error("infrastructure failure, excluded from ledger: %s", msg)
            return msg

    if workers <= 1:
        results = [run(c) for c in cases]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, cases))
    records = sorted((r for r in results if isinstance(r, DiffRecord)), key=DiffRecord.sort_key)
    return DiffRun(records, [r for r in results if isinstance(r, str)])


# -- ledger -------------------------------------------------------------------


def _percent(part: int, whole: int) -> int:
    return (200 * part + whole) // (2 * whole) if whole else 0


@dataclass(frozen=True)
class CategoryRow:
    category: ServiceResult
    match: frozenset[str]
    mismatch: frozenset[str]

    @property
    def match_count(self) -> int:
        return len(self.match)

    @property
    def mismatch_count(self) -> int:
        return len(self.mismatch)


@dataclass(frozen=True)
class DiffLedger:
    executed: frozenset[str]
    rows: tuple[CategoryRow, ...]

    def row(self, category: ServiceResult) -> CategoryRow:
        return next(r for r in self.rows if r.category is category)

    @property
    def total_mismatches(self) -> int:
        return sum(r.mismatch_count for r in self.rows)

    def _keys(self) -> list[tuple[str, int]]:
        out = []
        for key in self.executed:
            rid, _, ver = key.rpartition("/")
            out.append((rid, int(ver)))
        return sorted(out)

    def labels(self, keys: Iterable[str]) -> list[str]:
        names = display_labels(self._keys())
        parsed = sorted((k.rpartition("/")[0], int(k.rpartition("/")[2])) for k in keys)
        return [names[k] for k in parsed]

    def match_pct(self, row: CategoryRow) -> int:
        return _percent(row.match_count, len(self.executed))

    def to_json(self) -> dict[str, Any]:
        return {
            "executed": sorted(self.executed),
            "categories": [
                {
                    "category": r.category.value,
                    "match_count": r.match_count,
                    "match_pct": self.match_pct(r),
                    "mismatch_count": r.mismatch_count,
                    "mismatch": self.labels(r.mismatch),
                    "mismatch_keys": sorted(r.mismatch),
                }
                for r in self.rows
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["category", "match", "match_pct", "mismatch", "mismatched_rules"])
        for r in self.rows:
            w.writerow([r.category.value, r.match_count, self.match_pct(r), r.mismatch_count, " ".join(self.labels(r.mismatch))])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"{'Result':<15} {'Match':>10} {'Mismatch':>9}  Mismatched rules"]
        for r in self.rows:
            match = f"{r.match_count} ({self.match_pct(r)}%)"
            lines.append(f"{r.category.value:<15} {match:>10} {r.mismatch_count:>9}  {', '.join(self.labels(r.mismatch))}")
        return "\n".join(lines)


def ledger(records: Iterable[DiffRecord]) -> DiffLedger:
    records = sorted(records, key=DiffRecord.sort_key)
    executed = frozenset(r.rule_key for r in records)
    bad: dict[ServiceResult, set[str]] = {c: set() for c in CATEGORY_ORDER}
    for r in records:
        if not r.match:
            bad[r.service].add(r.rule_key)
    rows = tuple(CategoryRow(c, executed - frozenset(bad[c]), frozenset(bad[c])) for c in CATEGORY_ORDER)
    return DiffLedger(executed, rows)


def write_records(records: Iterable[DiffRecord], path: str | Path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")


def read_records(path: str | Path) -> list[DiffRecord]:
    with open(path) as fh:
        return [DiffRecord.from_json(json.loads(line)) for line in fh if line.strip()]
