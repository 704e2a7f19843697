"""Policy-free reference engine: a thin wrapper over rule categorization.

It ignores ``active`` flags, versions and every service-side policy, so any
policy the simulated service applies shows up as a difference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

from .rules import CoercionError, EvalError, Record, Rule, Schema, TriState, categorize, coerce_record


@dataclass(frozen=True)
class RefOutcome:
    result: TriState | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.result is not None

    def to_json(self) -> dict[str, Any]:
        if self.ok:
            return {"result": self.result.value}
        return {"error": self.error}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> RefOutcome:
        if "result" in data:
            return cls(result=TriState(data["result"]))
        return cls(error=str(data.get("error", "")))


def validate(rule: Rule, record: Record) -> RefOutcome:
    try:
        return RefOutcome(result=categorize(rule.expression, record))
    except EvalError as exc:
        return RefOutcome(error=str(exc))


def validate_raw(rule: Rule, raw: Mapping[str, Any], schema: Schema) -> RefOutcome:
    """Coerce a JSON test record with ``schema`` first; bad values become errors."""
    try:
        record = coerce_record(raw, schema)
    except CoercionError as exc:
        return RefOutcome(error=f"bad input: {exc}")
    return validate(rule, record)
