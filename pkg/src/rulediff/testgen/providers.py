"""Completion providers: an OpenAI-style chat client and a scripted mock."""

from __future__ import annotations

import json
import os
import random
import re
import threading
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Protocol

import httpx

from ..rules import Schema, TriState, parse
from .parsing import CASE_KEYS, SLOT_FOR
from .prompt import Prompt, rule_text_from


class ProviderConfigError(RuntimeError):
    """Bad credentials or settings; not worth retrying."""


class ProviderTransportError(RuntimeError):
    """Network failure, timeout, rate limit or server error; retryable."""


class Provider(Protocol):
    name: str
    combined: bool

    def complete(self, prompt: Prompt, *, temperature: float, seed: int) -> str: ...


class HttpChatProvider:
    """Chat-completions client (``POST {base_url}/chat/completions``)."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str,
        *,
        name: str | None = None,
        combined: bool = False,
        timeout: float = 120.0,
    ):
        if not api_key:
            raise ProviderConfigError("missing API key")
        if not base_url or not model:
            raise ProviderConfigError("base URL and model are required")
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.name = name or model
        self.combined = combined
        self._http = httpx.Client(timeout=timeout, headers={"Authorization": f"Bearer {api_key}"})

    @classmethod
    def from_env(cls, combined: bool = False, name: str | None = None, env: Mapping[str, str] | None = None) -> HttpChatProvider:
        env = os.environ if env is None else env
        missing = [k for k in ("PROVIDER_API_KEY", "PROVIDER_BASE_URL", "PROVIDER_MODEL") if not env.get(k)]
        if missing:
            raise ProviderConfigError(f"missing environment variables: {', '.join(missing)}")
        return cls(env["PROVIDER_BASE_URL"], env["PROVIDER_MODEL"], env["PROVIDER_API_KEY"], name=name, combined=combined)

    def complete(self, prompt: Prompt, *, temperature: float, seed: int) -> str:
        if prompt.combined != self.combined:
            prompt = Prompt(prompt.system, prompt.user, self.combined, prompt.rule_key)
        body = {"model": self.model, "messages": prompt.messages(), "temperature": temperature, "seed": seed}
        try:
            resp = self._http.post(f"{self.base_url}/chat/completions", json=body)
        except httpx.TransportError as exc:
            raise ProviderTransportError(str(exc)) from exc
        if resp.status_code in (401, 403):
            raise ProviderConfigError(f"provider rejected credentials (HTTP {resp.status_code})")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise ProviderTransportError(f"provider returned HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise ProviderConfigError(f"provider returned HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderTransportError(f"malformed provider response: {exc}") from exc


# -- mock ---------------------------------------------------------------------

BEHAVIOURS = (
    "correct",
    "wrong_pass",
    "wrong_fail",
    "wrong_notapplied",
    "dmy_dates",
    "semantic_alteration",
    "missing_types",
    "additional_tests",
    "lack_of_integration",
    "unquoted_names",
    "missing_pairs",
    "wrong_structure",
    "missing_delimiters",
    "transport_error",
    "transport_outage",
)


@dataclass(frozen=True)
class MockScenario:
    """Behaviour weights, with optional per-rule-id overrides."""

    weights: Mapping[str, float] = field(default_factory=lambda: {"correct": 1.0})
    rules: Mapping[str, Mapping[str, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for table in [self.weights, *self.rules.values()]:
            unknown = set(table) - set(BEHAVIOURS)
            if unknown:
                raise ValueError(f"unknown mock behaviours: {sorted(unknown)}")
            if not any(w > 0 for w in table.values()):
                raise ValueError("mock weights must include a positive entry")

    def weights_for(self, rule_key: str) -> Mapping[str, float]:
        rule_id = rule_key.split("/")[0]
        return self.rules.get(rule_key) or self.rules.get(rule_id) or self.weights

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> MockScenario:
        return cls(weights=dict(data.get("weights", {"correct": 1.0})), rules={k: dict(v) for k, v in data.get("rules", {}).items()})

    @classmethod
    def load(cls, path: str | Path) -> MockScenario:
        return cls.from_json(json.loads(Path(path).read_text()))

    @classmethod
    def builtin(cls, name: str) -> MockScenario:
        text = resources.files("rulediff.data").joinpath(f"mock_{name}.json").read_text()
        return cls.from_json(json.loads(text))


def _dmy(value: Any) -> Any:
    if isinstance(value, str) and re.fullmatch(r"\d{4}-\d{2}-\d{2}", value):
        y, m, d = value.split("-")
        return f"{d}-{m}-{y}"
    return value


def _unquote_keys(text: str) -> str:
    return re.sub(r'"([A-Za-z_]\w*)"\s*:', r"\1:", text)


class MockProvider:
    """Deterministic stand-in for a model.

    Answers come from brute-force witnesses of the rule in the prompt and are
    then degraded according to the scenario: wrong cases, DD-MM-YYYY dates,
    each hallucination shape, or transport errors. ``transport_error`` fails
    only the first attempt for a given (rule, seed), so a retry recovers;
    ``transport_outage`` fails every attempt. Temperature is ignored; apart
    from that attempt count the output is a pure function of (prompt, seed,
    scenario).
    """

    def __init__(self, schema: Schema, scenario: MockScenario | None = None, *, name: str = "mock", combined: bool = False):
        self.schema = dict(schema)
        self.scenario = scenario or MockScenario()
        self.name = name
        self.combined = combined
        self._witness_cache: dict[str, dict[TriState, dict[str, Any]]] = {}
        self._attempts: Counter[tuple[str, int]] = Counter()
        self._lock = threading.Lock()

    def _witnesses(self, rule_text: str) -> dict[TriState, dict[str, Any]]:
        from ..corpus import find_witnesses
        from ..rules import to_json_record

        if rule_text not in self._witness_cache:
            found = find_witnesses(parse(rule_text), self.schema)
            self._witness_cache[rule_text] = {t: to_json_record(r) for t, r in found.items()}
        return self._witness_cache[rule_text]

    def _cases(self, rule_text: str) -> dict[str, dict[str, Any]]:
        found = self._witnesses(rule_text)
        fallback = next(iter(found.values()), {})
        return {SLOT_FOR[t]: dict(found.get(t, fallback)) for t in TriState}

    def complete(self, prompt: Prompt, *, temperature: float, seed: int) -> str:
        rng = random.Random(seed)
        table = self.scenario.weights_for(prompt.rule_key)
        names = sorted(table)
        behaviour = rng.choices(names, weights=[table[n] for n in names])[0]
        if behaviour == "transport_outage":
            raise ProviderTransportError("mock outage")
        if behaviour == "transport_error":
            with self._lock:
                self._attempts[(prompt.rule_key, seed)] += 1
                first = self._attempts[(prompt.rule_key, seed)] == 1
            if first:
                raise ProviderTransportError("mock transient failure")

        cases = self._cases(rule_text_from(prompt))
        confidence = round(rng.uniform(0.6, 1.0), 2)
        if behaviour == "wrong_pass":
            cases["satisfying_case"] = cases["violating_case"]
        elif behaviour == "wrong_fail":
            cases["violating_case"] = cases["satisfying_case"]
        elif behaviour == "wrong_notapplied":
            cases["invalid_case"] = cases["satisfying_case"]
        elif behaviour == "dmy_dates":
            cases = {k: {n: _dmy(v) for n, v in c.items()} for k, c in cases.items()}
        obj: dict[str, Any] = {**cases, "confidence_score": confidence}

        if behaviour == "semantic_alteration":
            obj = {("violation_case" if k == "violating_case" else k): v for k, v in obj.items()}
        elif behaviour == "missing_types":
            obj.pop("invalid_case")
        elif behaviour == "additional_tests":
            obj["invalid_case_1"] = dict(obj["invalid_case"])
        elif behaviour == "lack_of_integration":
            return "\n".join(json.dumps({k: obj[k]}) for k in CASE_KEYS)
        elif behaviour == "wrong_structure":
            return json.dumps([{k: obj[k]} for k in CASE_KEYS])

        text = json.dumps(obj, indent=2)
        if behaviour == "unquoted_names":
            return _unquote_keys(text)
        if behaviour == "missing_pairs":
            return re.sub(r':\s*("[^"]*"|[-\d.]+|null)(\s*[,}\n])', r":\2", text, count=1)
        if behaviour == "missing_delimiters":
            return text.replace(",\n", "\n", 1)
        return text
