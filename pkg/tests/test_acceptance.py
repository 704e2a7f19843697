"""Acceptance criteria, one test each. Every test prints a PASS/FAIL line,
and the lines are repeated in the terminal summary."""

from __future__ import annotations

import json
import random
import tempfile
import time
from pathlib import Path

import pytest

from rulediff.difftest import cases_from_tests, ledger, run_tests
from rulediff.faultseed import FAULT_CLASSES, seed
from rulediff.metrics import success_index
from rulediff.mutation import MutationOperator, mutate_all, site_counts
from rulediff.pipeline import ProviderSpec, RunConfig, run_pipeline, stable_bytes
from rulediff.rules import TriState, categorize, variables
from rulediff.service import FaultConfig, HttpServiceClient, embedded_service
from rulediff.stats import SampleGroup, kruskal_wallis, magnitude, scale_a12
from rulediff.testgen import GeneratedTestSet, parse_response

from conftest import FIXTURES, GOLDEN
from oracle import assignments, oracle_category, random_rule

RESULTS: list[str] = []


def verdict(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {title} ({detail})"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_c01_tristate_oracle():
    rng = random.Random(1)
    start = time.perf_counter()
    pairs = agree = 0
    for _ in range(500):
        rule = random_rule(rng)
        for rec in assignments(variables(rule)):
            pairs += 1
            agree += categorize(rule, rec).value == oracle_category(rule, rec)
    took = time.perf_counter() - start
    verdict(1, "tri-state oracle equivalence", agree == pairs and took < 60, f"{agree}/{pairs} pairs in {took:.2f}s")


def test_c02_success_index():
    si = success_index(25, 15, 30)
    verdict(2, "SI worked example", abs(si - 62.732) <= 1e-3, f"SI={si:.4f}")


def test_c03_kruskal_wallis():
    h, _ = kruskal_wallis([SampleGroup("a", [1, 2, 3]), SampleGroup("b", [4, 5, 6]), SampleGroup("c", [7, 8, 9])])
    degenerate = kruskal_wallis([SampleGroup("a", [4, 4]), SampleGroup("b", [4, 4, 4])])
    verdict(3, "Kruskal-Wallis", abs(h - 7.2) <= 1e-9 and degenerate == (0.0, 1.0), f"H={h!r}, identical groups {degenerate}")


def test_c04_vda_bands():
    rows = json.loads((FIXTURES / "vda_bands.json").read_text())
    agree = sum(magnitude(scale_a12(r["a12"])) == r["magnitude"] for r in rows)
    verdict(4, "Vargha-Delaney bands", agree == len(rows), f"{agree}/{len(rows)} labels")


def test_c05_mutation_accounting(golden_rules):
    golden = json.loads((GOLDEN / "mutation_counts.json").read_text())
    counts = site_counts(golden_rules)
    co = sum(m.operator is MutationOperator.CO for m in mutate_all(golden_rules) if m.source_key == "V01/1")
    ok = counts == golden["sites"] and co == 3 and len(mutate_all(golden_rules)) == golden["mutants"]
    verdict(5, "mutation accounting", ok, f"{len(counts)} rules, CO on three-and rule={co}")


def _run(rules, schema, template, faults, tests):
    with embedded_service(rules, schema, faults) as srv, HttpServiceClient(srv.url) as client:
        return run_tests(cases_from_tests(tests), rules, template, schema, client)


def test_c06_baseline(golden_rules, golden_schema, golden_template, golden_tests):
    start = time.perf_counter()
    run = _run(golden_rules, golden_schema, golden_template, FaultConfig.empty(), golden_tests)
    took = time.perf_counter() - start
    lg = ledger(run.records)
    ok = lg.total_mismatches == 0 and not run.infra_failures and len(run.records) == 3 * len(golden_rules) and took < 30
    verdict(6, "differential baseline soundness", ok, f"{len(run.records)} executions, {lg.total_mismatches} mismatches, {took:.2f}s")


def test_c07_seeded_faults(golden_rules, golden_schema, golden_template, golden_tests):
    chosen = ["V02/1", "V04/1"]
    failures = []
    for cls in FAULT_CLASSES:
        s = seed({cls: chosen}, golden_rules, golden_schema, golden_template, golden_tests)
        lg = ledger(_run(golden_rules, golden_schema, golden_template, s.faults, s.tests).records)
        if {r.category: r.mismatch for r in lg.rows} != s.expected:
            failures.append(cls)
    stored = json.loads((GOLDEN / "combined_faults.json").read_text())
    s = seed(stored["classes"], golden_rules, golden_schema, golden_template, golden_tests)
    combined = ledger(_run(golden_rules, golden_schema, golden_template, s.faults, s.tests).records)
    golden_ok = combined.to_csv() == (GOLDEN / "combined_ledger.csv").read_text()
    detail = f"{len(FAULT_CLASSES) - len(failures)}/{len(FAULT_CLASSES)} classes exact, combined golden {'equal' if golden_ok else 'differs'}"
    verdict(7, "seeded-fault recall", not failures and golden_ok, detail)


def test_c08_ledger_arithmetic():
    from rulediff.difftest import DiffRecord
    from rulediff.refengine import RefOutcome
    from rulediff.service import ServiceResult

    rng = random.Random(8)
    keys = [f"V{i:02d}/{v}" for i in range(1, 8) for v in (1, 2)]
    bad = 0
    cases = 1500
    for _ in range(cases):
        records = []
        for _ in range(rng.randint(1, 60)):
            rid, ver = rng.choice(keys).split("/")
            ref = rng.choice([RefOutcome(t) for t in TriState] + [RefOutcome(error="x")])
            records.append(DiffRecord(rid, int(ver), rng.choice(list(TriState)), rng.randint(1, 5), ref, rng.choice(list(ServiceResult))))
        lg = ledger(records)
        bad += any(r.match_count + r.mismatch_count != len(lg.executed) for r in lg.rows)
    verdict(8, "ledger arithmetic", bad == 0, f"{cases} random record sets, {bad} violations")


def test_c09_determinism():
    digests = []
    with tempfile.TemporaryDirectory() as tmp:
        for i in range(2):
            cfg = RunConfig(
                out_dir=Path(tmp) / str(i),
                rules=GOLDEN / "corpus" / "rules.json",
                schema=GOLDEN / "corpus" / "schema.json",
                template=GOLDEN / "corpus" / "template.json",
                providers=[ProviderSpec("alpha", "mock", "default"), ProviderSpec("beta", "mock", "sloppy")],
                reps=5,
                seed=7,
                serve_embedded=True,
            )
            run = run_pipeline(cfg)
            files = sorted(p for p in run.iterdir() if p.name != "manifest.json")
            digests.append({p.name: stable_bytes(p) for p in files})
    same = digests[0] == digests[1]
    verdict(9, "determinism", same, f"{len(digests[0])} artifacts compared")


def test_c10_hallucinations():
    cases = json.loads((FIXTURES / "hallucinations.json").read_text())
    agree = 0
    for c in cases:
        out = parse_response(c["completion"])
        got = "ok" if isinstance(out, GeneratedTestSet) else out.label
        agree += got == c["label"]
    labels = {c["label"] for c in cases}
    covered = {"SemanticAlteration", "MissingTestTypes", "AdditionalTests", "LackOfIntegration",
               "InvalidJson:unquotedNames", "InvalidJson:missingPairs", "InvalidJson:wrongStructure",
               "InvalidJson:missingDelimiters"} <= labels
    verdict(10, "hallucination classifier", agree == len(cases) == 15 and covered, f"{agree}/{len(cases)} hand labels")


@pytest.fixture(scope="module", autouse=True)
def _summary(request):
    yield
    request.config._acceptance_lines = list(RESULTS)
