"""Repeated test generation per rule, with retries, timing and JSON-lines I/O."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from ..rules import Rule
from .parsing import (
    GeneratedTestSet,
    Hallucination,
    HallucinationReport,
    JsonDefect,
    exact_match,
    parse_response,
)
from .prompt import build_prompt
from .providers import Provider, ProviderConfigError, ProviderTransportError

log = logging.getLogger(__name__)

DEFAULT_REPS = 30
DEFAULT_TEMPERATURE = 0.7
DEFAULT_RETRIES = 3


@dataclass(frozen=True)
class TransportFailure:
    message: str


Outcome = GeneratedTestSet | HallucinationReport | TransportFailure


@dataclass(frozen=True)
class GenerationRecord:
    rule_id: str
    version: int
    provider: str
    rep: int
    raw: str | None
    outcome: Outcome
    latency: float
    attempts: int = 1

    @property
    def rule_key(self) -> str:
        return f"{self.rule_id}/{self.version}"

    @property
    def em(self) -> bool:
        return exact_match(self.outcome)

    def to_json(self) -> dict[str, Any]:
        if isinstance(self.outcome, GeneratedTestSet):
            outcome = {"kind": "tests", **self.outcome.to_json()}
        elif isinstance(self.outcome, HallucinationReport):
            outcome = {"kind": "hallucination", **self.outcome.to_json()}
        else:
            outcome = {"kind": "transport_failure", "message": self.outcome.message}
        return {
            "rule_id": self.rule_id,
            "version": self.version,
            "provider": self.provider,
            "rep": self.rep,
            "attempts": self.attempts,
            "raw": self.raw,
            "outcome": outcome,
            "latency": self.latency,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> GenerationRecord:
        o = dict(data["outcome"])
        kind = o.pop("kind")
        if kind == "tests":
            outcome: Outcome = GeneratedTestSet(**o)
        elif kind == "hallucination":
            sub = o.get("subkind")
            outcome = HallucinationReport(Hallucination(o["category"]), JsonDefect(sub) if sub else None, o.get("detail", ""))
        else:
            outcome = TransportFailure(o.get("message", ""))
        return cls(
            data["rule_id"], int(data["version"]), data["provider"], int(data["rep"]),
            data.get("raw"), outcome, float(data.get("latency", 0.0)), int(data.get("attempts", 1)),
        )


def derive_seed(run_seed: int, rule_key: str, rep: int) -> int:
    digest = hashlib.sha256(f"{run_seed}:{rule_key}:{rep}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _one(
    rule: Rule, provider: Provider, rep: int, temperature: float, seed: int, retries: int, backoff: float
) -> GenerationRecord:
    prompt = build_prompt(rule, combined=provider.combined)
    hint = derive_seed(seed, rule.key, rep)
    error = ""
    total = 0.0
    for attempt in range(1, retries + 2):
        started = time.perf_counter()
        try:
            raw = provider.complete(prompt, temperature=temperature, seed=hint)
        except ProviderTransportError as exc:
            total += time.perf_counter() - started
            error = str(exc)
            log.info("%s rep %d attempt %d: %s", rule.key, rep, attempt, exc)
            if attempt <= retries and backoff > 0:
                time.sleep(backoff * 2 ** (attempt - 1))
            continue
        latency = time.perf_counter() - started
        return GenerationRecord(rule.id, rule.version, provider.name, rep, raw, parse_response(raw), latency, attempt)
    log.warning("%s rep %d: giving up after %d attempts: %s", rule.key, rep, retries + 1, error)
    return GenerationRecord(rule.id, rule.version, provider.name, rep, None, TransportFailure(error), total, retries + 1)


def generate(
    rule: Rule,
    provider: Provider,
    reps: int = DEFAULT_REPS,
    temperature: float = DEFAULT_TEMPERATURE,
    seed: int = 0,
    *,
    retries: int = DEFAULT_RETRIES,
    backoff: float = 0.5,
    workers: int = 1,
) -> list[GenerationRecord]:
    return generate_all([rule], provider, reps, temperature, seed, retries=retries, backoff=backoff, workers=workers)


def generate_all(
    rules: Sequence[Rule],
    provider: Provider,
    reps: int = DEFAULT_REPS,
    temperature: float = DEFAULT_TEMPERATURE,
    seed: int = 0,
    *,
    retries: int = DEFAULT_RETRIES,
    backoff: float = 0.5,
    workers: int = 1,
) -> list[GenerationRecord]:
    """``reps`` records per rule, ordered by (rule, repetition) whatever the
    completion order. Configuration errors from the provider abort the run."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    jobs = [(rule, rep) for rule in rules for rep in range(1, reps + 1)]

    def run(job):
        rule, rep = job
        return _one(rule, provider, rep, temperature, seed, retries, backoff)

    if workers <= 1:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, jobs))


def write_records(records: Iterable[GenerationRecord], path: str | Path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")


def read_records(path: str | Path) -> list[GenerationRecord]:
    with open(path) as fh:
        return [GenerationRecord.from_json(json.loads(line)) for line in fh if line.strip()]


__all__ = [
    "DEFAULT_REPS", "DEFAULT_TEMPERATURE", "GenerationRecord", "ProviderConfigError", "TransportFailure",
    "derive_seed", "generate", "generate_all", "read_records", "write_records",
]
