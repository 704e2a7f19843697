from __future__ import annotations

import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from rulediff.corpus import oracle_tests
from rulediff.rules import load_rules, load_schema

GOLDEN = Path(__file__).parent / "golden"
FIXTURES = Path(__file__).parent / "fixtures"

settings.register_profile("default", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def golden_rules():
    return load_rules(GOLDEN / "corpus" / "rules.json")


@pytest.fixture(scope="session")
def golden_schema():
    return load_schema(GOLDEN / "corpus" / "schema.json")


@pytest.fixture(scope="session")
def golden_template():
    return json.loads((GOLDEN / "corpus" / "template.json").read_text())


@pytest.fixture(scope="session")
def golden_tests(golden_rules, golden_schema):
    return {r.key: oracle_tests(r, golden_schema) for r in golden_rules}


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
