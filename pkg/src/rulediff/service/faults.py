"""Message validation for the simulated production service, with seedable faults.

Processing order for one message: strict date-format gate (whole response
500), pre-aggregation gate (whole response empty), then per-rule evaluation
with version policy, always-NotApplied overrides and Warning escalation.
"""

from __future__ import annotations

import datetime as dt
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping

from ..rules import CoercionError, EvalError, Rule, Schema, TriState, categorize, variables
from ..rules.values import coerce_value


class ServiceResult(str, Enum):
    PASS = "Pass"
    FAIL = "Fail"
    NOT_APPLIED = "NotApplied"
    WARNING = "Warning"
    HTTP_500 = "500"
    EMPTY = "Empty Response"

    @classmethod
    def from_tristate(cls, t: TriState) -> ServiceResult:
        return cls(t.value)


CATEGORY_ORDER = tuple(ServiceResult)

VERSION_POLICIES = ("active", "inactive-fail", "inactive-notapplied")

DEFAULT_DATE_FORMAT = "YYYY-MM-DD"


def compile_date_format(fmt: str) -> re.Pattern[str]:
    """``YYYY``/``MM``/``DD`` placeholders; everything else is literal."""
    out, i = [], 0
    tokens = {"YYYY": r"(?P<y>\d{4})", "MM": r"(?P<m>\d{2})", "DD": r"(?P<d>\d{2})"}
    while i < len(fmt):
        for tok, rx in tokens.items():
            if fmt.startswith(tok, i):
                out.append(rx)
                i += len(tok)
                break
        else:
            out.append(re.escape(fmt[i]))
            i += 1
    pattern = re.compile("^" + "".join(out) + "$")
    if set(pattern.groupindex) != {"y", "m", "d"}:
        raise ValueError(f"date format {fmt!r} must contain YYYY, MM and DD exactly once")
    return pattern


def matches_date_format(value: Any, pattern: re.Pattern[str]) -> bool:
    if not isinstance(value, str):
        return False
    m = pattern.match(value)
    if not m:
        return False
    try:
        dt.date(int(m["y"]), int(m["m"]), int(m["d"]))
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class FaultConfig:
    """Service-side deviations from the reference semantics.

    ``version_policy`` maps ``"id/version"`` to one of ``active``,
    ``inactive-fail`` or ``inactive-notapplied``; an inactive version still
    evaluates but its Pass is downgraded. ``strict_date_format=None``
    disables the date gate.
    """

    version_policy: Mapping[str, str] = field(default_factory=dict)
    strict_date_format: str | None = DEFAULT_DATE_FORMAT
    pre_aggregation_vars: frozenset[str] = frozenset()
    warning_rules: frozenset[str] = frozenset()
    always_not_applied_rules: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        for key, policy in self.version_policy.items():
            if policy not in VERSION_POLICIES:
                raise ValueError(f"version policy for {key!r} must be one of {VERSION_POLICIES}")
        if self.strict_date_format is not None:
            compile_date_format(self.strict_date_format)

    @classmethod
    def empty(cls) -> FaultConfig:
        """All versions active, no gates, no overrides."""
        return cls(strict_date_format=None)

    def check(self, rules: Iterable[Rule], schema: Schema) -> None:
        rules = list(rules)
        keys = {r.key for r in rules}
        ids = {r.id for r in rules}
        for key in self.version_policy:
            if key not in keys:
                raise ValueError(f"version policy names unknown rule {key!r}")
        for rid in self.warning_rules | self.always_not_applied_rules:
            if rid not in ids:
                raise ValueError(f"fault config names unknown rule id {rid!r}")
        for var in self.pre_aggregation_vars:
            if var not in schema:
                raise ValueError(f"pre-aggregation variable {var!r} not in schema")

    def to_json(self) -> dict[str, Any]:
        return {
            "versionPolicy": dict(sorted(self.version_policy.items())),
            "strictDateFormat": self.strict_date_format,
            "preAggregationVars": sorted(self.pre_aggregation_vars),
            "warningRules": sorted(self.warning_rules),
            "alwaysNotAppliedRules": sorted(self.always_not_applied_rules),
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> FaultConfig:
        known = {"versionPolicy", "strictDateFormat", "preAggregationVars", "warningRules", "alwaysNotAppliedRules"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown fault config keys: {sorted(unknown)}")
        return cls(
            version_policy=dict(data.get("versionPolicy", {})),
            strict_date_format=data.get("strictDateFormat", DEFAULT_DATE_FORMAT),
            pre_aggregation_vars=frozenset(data.get("preAggregationVars", ())),
            warning_rules=frozenset(data.get("warningRules", ())),
            always_not_applied_rules=frozenset(data.get("alwaysNotAppliedRules", ())),
        )

    @classmethod
    def load(cls, path: str | Path) -> FaultConfig:
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ServiceResponse:
    """Either per-rule results or a whole-response 500 / empty response."""

    results: Mapping[str, ServiceResult] = field(default_factory=dict)
    whole: ServiceResult | None = None

    def result_for(self, key: str) -> ServiceResult:
        if self.whole is not None:
            return self.whole
        # a rule the service did not report on is indistinguishable from no answer
        return self.results.get(key, ServiceResult.EMPTY)


def _message_gate(message: Mapping[str, Any], schema: Schema, cfg: FaultConfig) -> ServiceResult | None:
    if cfg.strict_date_format is not None:
        pattern = compile_date_format(cfg.strict_date_format)
        for name, vtype in schema.items():
            value = message.get(name)
            if vtype == "date" and value is not None and not matches_date_format(value, pattern):
                return ServiceResult.HTTP_500
    for name in sorted(cfg.pre_aggregation_vars):
        value = message.get(name)
        if value is None:
            return ServiceResult.EMPTY
        try:
            coerce_value(value, schema[name])
        except CoercionError:
            return ServiceResult.EMPTY
    return None


def _apply_policies(rule: Rule, outcome: TriState, cfg: FaultConfig) -> ServiceResult:
    result = ServiceResult.from_tristate(outcome)
    policy = cfg.version_policy.get(rule.key, "active")
    if result is ServiceResult.PASS and policy == "inactive-fail":
        result = ServiceResult.FAIL
    elif result is ServiceResult.PASS and policy == "inactive-notapplied":
        result = ServiceResult.NOT_APPLIED
    if rule.id in cfg.always_not_applied_rules:
        result = ServiceResult.NOT_APPLIED
    if result is ServiceResult.FAIL and rule.id in cfg.warning_rules:
        result = ServiceResult.WARNING
    return result


def validate_message(
    message: Mapping[str, Any], rules: Iterable[Rule], schema: Schema, cfg: FaultConfig
) -> ServiceResponse:
    if not isinstance(message, Mapping):
        raise ValueError("message must be a JSON object")
    gate = _message_gate(message, schema, cfg)
    if gate is not None:
        return ServiceResponse(whole=gate)

    record: dict[str, Any] = {}
    bad: set[str] = set()
    for name, vtype in schema.items():
        try:
            record[name] = coerce_value(message.get(name), vtype)
        except CoercionError:
            bad.add(name)

    results: dict[str, ServiceResult] = {}
    for rule in rules:
        if bad.intersection(variables(rule.expression)):
            results[rule.key] = ServiceResult.HTTP_500
            continue
        try:
            outcome = categorize(rule.expression, record)
        except EvalError:
            results[rule.key] = ServiceResult.HTTP_500
            continue
        results[rule.key] = _apply_policies(rule, outcome, cfg)
    return ServiceResponse(results=results)
