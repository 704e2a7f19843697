"""Seeding service faults against chosen rules, with the expected fallout.

A fault class is enabled for a set of rules by adjusting the service's
FaultConfig and, for the message-level classes, the tests sent for those
rules (dates rewritten to DD-MM-YYYY, the pre-aggregation variable nulled).
Each class is expected to surface in exactly one ledger category.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, replace
from typing import Any

from .rules import Rule, Schema, parse_date
from .service import DEFAULT_DATE_FORMAT, FaultConfig, ServiceResult
from .testgen import SLOT_FOR, GeneratedTestSet

FAULT_CLASSES = (
    "version-fail",
    "version-notapplied",
    "date-format",
    "pre-aggregation",
    "warning",
    "always-notapplied",
)

EXPECTED_CATEGORY = {
    "version-fail": ServiceResult.FAIL,
    "version-notapplied": ServiceResult.NOT_APPLIED,
    "date-format": ServiceResult.HTTP_500,
    "pre-aggregation": ServiceResult.EMPTY,
    "warning": ServiceResult.WARNING,
    "always-notapplied": ServiceResult.NOT_APPLIED,
}


def _dmy(value: Any) -> Any:
    if not isinstance(value, str):
        return value
    try:
        d = parse_date(value)
    except ValueError:
        return value
    return f"{d.day:02d}-{d.month:02d}-{d.year:04d}"


def _map_cases(ts: GeneratedTestSet, fn) -> GeneratedTestSet:
    return replace(ts, **{slot: fn(ts.case(t)) for t, slot in SLOT_FOR.items()})


def dmy_dates(ts: GeneratedTestSet, schema: Schema, template: Mapping[str, Any]) -> GeneratedTestSet:
    """Every date in the cases as DD-MM-YYYY; a case without a non-null date
    gets the template's first date variable, rewritten."""
    date_vars = [n for n, t in schema.items() if t == "date"]
    filler = next((n for n in date_vars if template.get(n) is not None), None)

    def fix(case: Mapping[str, Any]) -> dict[str, Any]:
        out = {k: (_dmy(v) if schema.get(k) == "date" else v) for k, v in case.items()}
        if filler and not any(schema.get(k) == "date" and v is not None for k, v in out.items()):
            out[filler] = _dmy(template[filler])
        return out

    return _map_cases(ts, fix)


def null_var(ts: GeneratedTestSet, name: str) -> GeneratedTestSet:
    return _map_cases(ts, lambda c: {**c, name: None})


@dataclass(frozen=True)
class Seeding:
    faults: FaultConfig
    tests: dict[str, GeneratedTestSet]
    expected: dict[ServiceResult, frozenset[str]]  # category -> rule keys


def seed(
    classes: Mapping[str, Iterable[str]],
    rules: Sequence[Rule],
    schema: Schema,
    template: Mapping[str, Any],
    tests: Mapping[str, GeneratedTestSet],
    pre_aggregation_var: str = "ds",
) -> Seeding:
    """``classes`` maps a fault class to the rule keys it is seeded on.

    Id-level classes (warning, always-notapplied) take rule keys too and
    apply to the key's id, so every version of that id is expected to show.
    """
    unknown = set(classes) - set(FAULT_CLASSES)
    if unknown:
        raise ValueError(f"unknown fault classes {sorted(unknown)}")
    keys = {r.key: r for r in rules}
    for cls, chosen in classes.items():
        for k in chosen:
            if k not in keys:
                raise ValueError(f"{cls}: unknown rule {k!r}")

    policy: dict[str, str] = {}
    warning: set[str] = set()
    not_applied: set[str] = set()
    out_tests = dict(tests)
    expected: dict[ServiceResult, set[str]] = {c: set() for c in ServiceResult}
    strict = None
    pre_agg: frozenset[str] = frozenset()

    for cls, chosen in classes.items():
        chosen = sorted(set(chosen))
        cat = EXPECTED_CATEGORY[cls]
        if cls in ("version-fail", "version-notapplied"):
            for k in chosen:
                policy[k] = "inactive-fail" if cls == "version-fail" else "inactive-notapplied"
            expected[cat].update(chosen)
        elif cls in ("warning", "always-notapplied"):
            ids = {keys[k].id for k in chosen}
            (warning if cls == "warning" else not_applied).update(ids)
            expected[cat].update(r.key for r in rules if r.id in ids)
        elif cls == "date-format":
            strict = DEFAULT_DATE_FORMAT
            for k in chosen:
                out_tests[k] = dmy_dates(out_tests[k], schema, template)
            expected[cat].update(chosen)
        else:
            pre_agg = frozenset({pre_aggregation_var})
            for k in chosen:
                out_tests[k] = null_var(out_tests[k], pre_aggregation_var)
            expected[cat].update(chosen)

    cfg = FaultConfig(
        version_policy=policy,
        strict_date_format=strict,
        pre_aggregation_vars=pre_agg,
        warning_rules=frozenset(warning),
        always_not_applied_rules=frozenset(not_applied),
    )
    return Seeding(cfg, out_tests, {c: frozenset(v) for c, v in expected.items()})


def older_versions(rules: Iterable[Rule]) -> list[str]:
    """Keys of every version below the highest one for its id."""
    latest: dict[str, int] = {}
    rules = list(rules)
    for r in rules:
        latest[r.id] = max(latest.get(r.id, 0), r.version)
    return sorted(r.key for r in rules if r.version < latest[r.id])

