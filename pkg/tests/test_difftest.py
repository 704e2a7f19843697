import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rulediff.difftest import (
    DiffRecord,
    EmbedError,
    TestCase,
    cases_from_generations,
    cases_from_tests,
    embed,
    ledger,
    read_records,
    run_pair,
    run_tests,
    write_records,
)
from rulediff.faultseed import EXPECTED_CATEGORY, FAULT_CLASSES, older_versions, seed
from rulediff.refengine import RefOutcome
from rulediff.rules import Rule, TriState
from rulediff.service import FaultConfig, HttpServiceClient, LocalServiceClient, ServiceResult, embedded_service
from rulediff.testgen import GenerationRecord, TransportFailure

from conftest import GOLDEN

SCHEMA = {"A": "integer", "B": "integer"}


def test_embed():
    template = {"A": 5, "B": 6}
    assert embed({}, template, SCHEMA) == template
    assert embed({"A": 1}, template, SCHEMA) == {"A": 1, "B": 6}
    assert embed({"A": None}, template, SCHEMA) == {"A": None, "B": 6}
    with pytest.raises(EmbedError):
        embed({"Z": 1}, template, SCHEMA)


def rec(ref, service, key="V01/1", t=TriState.PASS, rep=1):
    rid, ver = key.split("/")
    ref = RefOutcome(TriState(ref)) if ref in {x.value for x in TriState} else RefOutcome(error=ref)
    return DiffRecord(rid, int(ver), t, rep, ref, ServiceResult(service))


@pytest.mark.parametrize(
    "ref,service,match",
    [("Pass", "Pass", True), ("Fail", "Warning", False), ("Pass", "500", False), ("boom", "500", False), ("NotApplied", "NotApplied", True)],
)
def test_match_rule(ref, service, match):
    r = rec(ref, service)
    assert r.match is match
    assert r.category is (None if match else ServiceResult(service))
    assert DiffRecord.from_json(r.to_json()) == r


def test_all_match():
    lg = ledger([rec("Pass", "Pass", f"V{i:02d}/1") for i in range(5)])
    for row in lg.rows:
        assert row.match == lg.executed and not row.mismatch


def test_one_warning_among_58():
    records = [rec("Fail", "Fail", f"V{i:02d}/1") for i in range(58)]
    records[10] = rec("Fail", "Warning", "V10/1")
    lg = ledger(records)
    row = lg.row(ServiceResult.WARNING)
    assert (row.match_count, lg.match_pct(row), row.mismatch_count) == (57, 98, 1)
    assert lg.labels(row.mismatch) == ["V10"]


def test_versioned_labels():
    lg = ledger([rec("Pass", "Fail", "V02/1"), rec("Pass", "Pass", "V02/2")])
    assert lg.labels(lg.row(ServiceResult.FAIL).mismatch) == ["V02/1"]


def test_cases_from_generations_skip_non_em():
    from rulediff.testgen import GeneratedTestSet

    ok = GenerationRecord("V01", 1, "p", 1, "{}", GeneratedTestSet({"A": 1}, {"A": 2}, {"A": 3}), 0.1)
    bad = GenerationRecord("V01", 1, "p", 2, None, TransportFailure("x"), 0.1)
    cases = cases_from_generations([ok, bad])
    assert [(c.test_type, c.record) for c in cases] == [
        (TriState.PASS, {"A": 1}), (TriState.FAIL, {"A": 2}), (TriState.NOT_APPLIED, {"A": 3}),
    ]


def test_unknown_variable_in_test_is_500():
    r = Rule.from_text("V01", "A = 1 implies B = 2", 1)
    client = LocalServiceClient([r], SCHEMA, FaultConfig.empty())
    d = run_pair(r, TestCase("V01/1", TriState.PASS, 1, {"A": 1, "Q": 2}), {}, SCHEMA, client)
    assert d.service is ServiceResult.HTTP_500 and not d.ref.ok


# -- ledger arithmetic over random record sets ----------------------------------------

ref_values = st.sampled_from(["Pass", "Fail", "NotApplied", "bad input"])
service_values = st.sampled_from([c.value for c in ServiceResult])
records = st.lists(
    st.builds(
        rec, ref_values, service_values,
        st.sampled_from(["V01/1", "V01/2", "V02/1", "V03/1", "V04/1"]),
        st.sampled_from(list(TriState)), st.integers(1, 3),
    ),
    min_size=1, max_size=40,
)


@settings(max_examples=1000)
@given(records)
def test_ledger_invariants(rs):
    lg = ledger(rs)
    assert lg.executed == {r.rule_key for r in rs}
    for row in lg.rows:
        assert row.match_count + row.mismatch_count == len(lg.executed)
        assert row.match | row.mismatch == lg.executed and not (row.match & row.mismatch)
        assert row.mismatch == {r.rule_key for r in rs if not r.match and r.service is row.category}
    assert lg.total_mismatches >= (1 if any(not r.match for r in rs) else 0)


@given(records)
def test_ledger_order_independent(rs):
    assert ledger(rs).to_csv() == ledger(list(reversed(rs))).to_csv()


def test_records_roundtrip(tmp_path):
    rs = [rec("Pass", "Pass"), rec("x", "Empty Response", "V02/1")]
    write_records(rs, tmp_path / "d.jsonl")
    assert read_records(tmp_path / "d.jsonl") == rs


# -- baseline and seeded faults through HTTP --------------------------------------------


def run_http(rules, schema, template, faults, tests):
    with embedded_service(rules, schema, faults) as srv, HttpServiceClient(srv.url) as client:
        return run_tests(cases_from_tests(tests), rules, template, schema, client)


def test_baseline_has_no_mismatches(golden_rules, golden_schema, golden_template, golden_tests):
    run = run_http(golden_rules, golden_schema, golden_template, FaultConfig.empty(), golden_tests)
    assert not run.infra_failures
    assert len(run.records) == 3 * len(golden_rules)
    assert ledger(run.records).total_mismatches == 0


def mismatch_sets(lg):
    return {row.category: row.mismatch for row in lg.rows}


@pytest.mark.parametrize("cls", FAULT_CLASSES)
def test_single_fault_class(cls, golden_rules, golden_schema, golden_template, golden_tests):
    chosen = ["V02/1", "V04/1"]
    s = seed({cls: chosen}, golden_rules, golden_schema, golden_template, golden_tests)
    run = run_http(golden_rules, golden_schema, golden_template, s.faults, s.tests)
    got = mismatch_sets(ledger(run.records))
    assert got == s.expected
    assert got[EXPECTED_CATEGORY[cls]]


def test_combined_faults_golden(golden_rules, golden_schema, golden_template, golden_tests):
    stored = json.loads((GOLDEN / "combined_faults.json").read_text())
    s = seed(stored["classes"], golden_rules, golden_schema, golden_template, golden_tests)
    assert s.faults.to_json() == stored["faults"]
    run = run_http(golden_rules, golden_schema, golden_template, s.faults, s.tests)
    lines = "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in run.records)
    assert lines == (GOLDEN / "combined_diff.jsonl").read_text()
    lg = ledger(run.records)
    assert lg.to_csv() == (GOLDEN / "combined_ledger.csv").read_text()
    assert mismatch_sets(lg) == s.expected


def test_seed_rejects_unknowns(golden_rules, golden_schema, golden_template, golden_tests):
    with pytest.raises(ValueError):
        seed({"gremlins": ["V01/1"]}, golden_rules, golden_schema, golden_template, golden_tests)
    with pytest.raises(ValueError):
        seed({"warning": ["V99/1"]}, golden_rules, golden_schema, golden_template, golden_tests)


def test_older_versions(golden_rules):
    assert older_versions(golden_rules) == ["V02/1", "V05/1"]
