"""Rules, rule registries, and their JSON file formats."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .ast import Expr, unparse
from .parser import parse
from .values import Schema, validate_schema


@dataclass(frozen=True)
class Rule:
    id: str
    version: int
    expression: Expr
    active: bool = True
    source: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("rule id must be non-empty")
        if not isinstance(self.version, int) or self.version < 1:
            raise ValueError(f"rule {self.id}: version must be a positive integer")

    @property
    def key(self) -> str:
        return f"{self.id}/{self.version}"

    @property
    def text(self) -> str:
        return self.source or unparse(self.expression)

    @classmethod
    def from_text(cls, id: str, text: str, version: int = 1, active: bool = True) -> Rule:
        return cls(id, version, parse(text), active, text)

    def to_json(self) -> dict[str, Any]:
        return {"id": self.id, "version": self.version, "active": self.active, "expression": self.text}


def rule_key(id: str, version: int) -> str:
    return f"{id}/{version}"


def check_unique(rules: Iterable[Rule]) -> None:
    seen: set[tuple[str, int]] = set()
    for r in rules:
        if (r.id, r.version) in seen:
            raise ValueError(f"duplicate rule {r.key}")
        seen.add((r.id, r.version))


def rules_from_json(data: Any) -> list[Rule]:
    if not isinstance(data, list):
        raise ValueError("rule registry must be a JSON array")
    rules = []
    for entry in data:
        rules.append(
            Rule.from_text(
                str(entry["id"]),
                entry["expression"],
                version=int(entry.get("version", 1)),
                active=bool(entry.get("active", True)),
            )
        )
    check_unique(rules)
    return rules


def load_rules(path: str | Path) -> list[Rule]:
    return rules_from_json(json.loads(Path(path).read_text()))


def dump_rules(rules: Iterable[Rule]) -> str:
    return json.dumps([r.to_json() for r in rules], indent=2) + "\n"


def load_schema(path: str | Path) -> Schema:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValueError("schema must be a JSON object")
    return validate_schema(data)


def display_labels(keys: Iterable[tuple[str, int]]) -> dict[tuple[str, int], str]:
    """``V19/1`` when an id has several versions, plain ``V21`` otherwise."""
    keys = list(keys)
    versions: dict[str, set[int]] = {}
    for id_, v in keys:
        versions.setdefault(id_, set()).add(v)
    return {(i, v): (f"{i}/{v}" if len(versions[i]) > 1 else i) for i, v in keys}
