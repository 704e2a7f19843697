"""Strict parsing of model completions and classification of malformed ones."""

from __future__ import annotations

import difflib
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

from ..rules import TriState

CASE_KEYS = ("satisfying_case", "violating_case", "invalid_case")
CONFIDENCE_KEY = "confidence_score"
EXPECTED_KEYS = frozenset(CASE_KEYS + (CONFIDENCE_KEY,))

SLOT_FOR = {
    TriState.PASS: "satisfying_case",
    TriState.FAIL: "violating_case",
    TriState.NOT_APPLIED: "invalid_case",
}


class Hallucination(str, Enum):
    SEMANTIC_ALTERATION = "SemanticAlteration"
    MISSING_TEST_TYPES = "MissingTestTypes"
    ADDITIONAL_TESTS = "AdditionalTests"
    LACK_OF_INTEGRATION = "LackOfIntegration"
    INVALID_JSON = "InvalidJson"


class JsonDefect(str, Enum):
    UNQUOTED_NAMES = "unquotedNames"
    MISSING_PAIRS = "missingPairs"
    WRONG_STRUCTURE = "wrongStructure"
    MISSING_DELIMITERS = "missingDelimiters"


@dataclass(frozen=True)
class GeneratedTestSet:
    satisfying_case: dict[str, Any]
    violating_case: dict[str, Any]
    invalid_case: dict[str, Any]
    confidence_score: float = 1.0

    def case(self, intent: TriState) -> dict[str, Any]:
        return getattr(self, SLOT_FOR[intent])

    def to_json(self) -> dict[str, Any]:
        return {
            "satisfying_case": self.satisfying_case,
            "violating_case": self.violating_case,
            "invalid_case": self.invalid_case,
            "confidence_score": self.confidence_score,
        }


@dataclass(frozen=True)
class HallucinationReport:
    category: Hallucination
    subkind: JsonDefect | None = None
    detail: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if (self.category is Hallucination.INVALID_JSON) != (self.subkind is not None):
            raise ValueError("subkind is required for, and only for, InvalidJson")

    @property
    def label(self) -> str:
        if self.subkind is None:
            return self.category.value
        return f"{self.category.value}:{self.subkind.value}"

    def to_json(self) -> dict[str, Any]:
        out = {"category": self.category.value}
        if self.subkind is not None:
            out["subkind"] = self.subkind.value
        if self.detail:
            out["detail"] = self.detail
        return out


def normalize_confidence(value: float) -> float:
    return value / 100.0 if value > 1 else float(value)


_FENCE = re.compile(r"```[A-Za-z]*[ \t]*\n?(.*?)\n?\s*```", re.DOTALL)


def _strip_wrapping(text: str) -> str:
    m = _FENCE.search(text)
    if m:
        text = m.group(1)
    text = text.strip()
    # tolerate prose before the first JSON value
    starts = [i for i in (text.find("{"), text.find("[")) if i >= 0]
    return text[min(starts):] if starts else text


def _decode_sequence(text: str) -> list[Any] | None:
    """All top-level JSON values in ``text``, or None if any part fails."""
    decoder = json.JSONDecoder()
    values, pos = [], 0
    while True:
        while pos < len(text) and text[pos] in " \t\r\n,":
            pos += 1
        if pos >= len(text):
            return values
        try:
            value, pos = decoder.raw_decode(text, pos)
        except json.JSONDecodeError:
            return None
        values.append(value)


_UNQUOTED_KEY = re.compile(r"[{,]\s*(?:[A-Za-z_][\w\-]*|'[^']*')\s*:")
_MISSING_VALUE = re.compile(r":\s*[,}\]]")
_MISSING_NAME = re.compile(r"[{,]\s*:")
_EMPTY_SLOT = re.compile(r",\s*,")


def _classify_invalid(text: str, error: json.JSONDecodeError | None) -> HallucinationReport:
    detail = str(error) if error else ""
    if _UNQUOTED_KEY.search(text):
        return HallucinationReport(Hallucination.INVALID_JSON, JsonDefect.UNQUOTED_NAMES, detail)
    if _MISSING_VALUE.search(text) or _MISSING_NAME.search(text) or _EMPTY_SLOT.search(text):
        return HallucinationReport(Hallucination.INVALID_JSON, JsonDefect.MISSING_PAIRS, detail)
    return HallucinationReport(Hallucination.INVALID_JSON, JsonDefect.MISSING_DELIMITERS, detail)


def _near(key: str, target: str) -> bool:
    return difflib.SequenceMatcher(None, key, target).ratio() >= 0.75


def _is_flat_case(value: Any) -> bool:
    return isinstance(value, dict) and all(
        isinstance(k, str) and (v is None or isinstance(v, (str, int, float, bool))) for k, v in value.items()
    )


def _classify_object(obj: Mapping[str, Any]) -> GeneratedTestSet | HallucinationReport:
    keys = set(obj)
    missing = EXPECTED_KEYS - keys
    extra = keys - EXPECTED_KEYS

    # a renamed expected key, e.g. violation_case for violating_case
    for m in sorted(missing):
        for e in sorted(extra):
            if _near(e, m) and not e.startswith(m):
                return HallucinationReport(Hallucination.SEMANTIC_ALTERATION, detail=f"{e!r} for {m!r}")
    if missing & set(CASE_KEYS):
        return HallucinationReport(Hallucination.MISSING_TEST_TYPES, detail=", ".join(sorted(missing)))
    if extra:
        return HallucinationReport(Hallucination.ADDITIONAL_TESTS, detail=", ".join(sorted(extra)))
    if CONFIDENCE_KEY in missing:
        return HallucinationReport(Hallucination.INVALID_JSON, JsonDefect.MISSING_PAIRS, "confidence_score missing")

    for slot in CASE_KEYS:
        if not _is_flat_case(obj[slot]):
            return HallucinationReport(Hallucination.INVALID_JSON, JsonDefect.WRONG_STRUCTURE, f"{slot} not a flat object")
        if not obj[slot] or any(k == "" for k in obj[slot]):
            return HallucinationReport(Hallucination.INVALID_JSON, JsonDefect.MISSING_PAIRS, f"{slot} lacks variables")
    conf = obj[CONFIDENCE_KEY]
    if isinstance(conf, bool) or not isinstance(conf, (int, float)):
        return HallucinationReport(Hallucination.INVALID_JSON, JsonDefect.WRONG_STRUCTURE, "confidence_score not a number")
    return GeneratedTestSet(
        satisfying_case=dict(obj["satisfying_case"]),
        violating_case=dict(obj["violating_case"]),
        invalid_case=dict(obj["invalid_case"]),
        confidence_score=normalize_confidence(conf),
    )


def parse_response(text: str) -> GeneratedTestSet | HallucinationReport:
    """Parse one completion. Markdown fences and leading prose are tolerated;
    anything else that deviates yields a :class:`HallucinationReport`."""
    body = _strip_wrapping(text or "")
    if not body:
        return HallucinationReport(Hallucination.INVALID_JSON, JsonDefect.WRONG_STRUCTURE, "empty completion")

    values = _decode_sequence(body)
    if values is None:
        try:
            json.loads(body)
            error = None
        except json.JSONDecodeError as exc:
            error = exc
        return _classify_invalid(body, error)

    if len(values) > 1:
        if all(isinstance(v, dict) for v in values):
            return HallucinationReport(Hallucination.LACK_OF_INTEGRATION, detail=f"{len(values)} separate objects")
        return HallucinationReport(Hallucination.INVALID_JSON, JsonDefect.WRONG_STRUCTURE, "several top-level values")

    (value,) = values
    if not isinstance(value, dict):
        return HallucinationReport(Hallucination.INVALID_JSON, JsonDefect.WRONG_STRUCTURE, f"top-level {type(value).__name__}")
    return _classify_object(value)


def exact_match(outcome: object) -> bool:
    return isinstance(outcome, GeneratedTestSet)
