import json

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rulediff.refengine import RefOutcome, validate_raw
from rulediff.rules import Rule, TriState
from rulediff.service import (
    HEALTH_PATH,
    VALIDATION_PATH,
    FaultConfig,
    HttpServiceClient,
    LocalServiceClient,
    ServiceResult,
    ServiceTransportError,
    embedded_service,
    validate_message,
)

SCHEMA = {"A": "integer", "B": "integer", "d": "date", "ds": "integer", "t": "text"}
RULES = [
    Rule.from_text("V19", "A = 1 implies B = 2", 1),
    Rule.from_text("V19", "A = 1 implies B = 3", 2),
    Rule.from_text("V20", "substring(t, 5, 2) = 'x'", 1),
]


# -- reference engine ------------------------------------------------------------


def test_ref_examples():
    r = RULES[0]
    assert validate_raw(r, {"A": 1, "B": 2}, SCHEMA) == RefOutcome(TriState.PASS)
    assert validate_raw(r, {"A": 0}, SCHEMA) == RefOutcome(TriState.NOT_APPLIED)
    bad = validate_raw(RULES[2], {"t": "ab"}, SCHEMA)
    assert not bad.ok and "substring" in bad.error
    assert not validate_raw(r, {"A": "one"}, SCHEMA).ok


def test_ref_ignores_activity():
    inactive = Rule.from_text("V19", "A = 1 implies B = 2", 1, active=False)
    assert validate_raw(inactive, {"A": 1, "B": 2}, SCHEMA).result is TriState.PASS


def test_ref_outcome_json():
    for o in (RefOutcome(TriState.FAIL), RefOutcome(error="boom")):
        assert RefOutcome.from_json(o.to_json()) == o


# -- validate_message --------------------------------------------------------------


def results(message, cfg):
    return validate_message(message, RULES, SCHEMA, cfg)


def test_date_gate():
    r = results({"A": 1, "B": 2, "d": "01-02-2021", "ds": 1}, FaultConfig())
    assert r.whole is ServiceResult.HTTP_500
    ok = results({"A": 1, "B": 2, "d": "2021-02-01", "ds": 1}, FaultConfig())
    assert ok.whole is None


def test_date_gate_before_pre_aggregation():
    cfg = FaultConfig(pre_aggregation_vars=frozenset({"ds"}))
    assert results({"d": "01-02-2021", "ds": None}, cfg).whole is ServiceResult.HTTP_500
    assert results({"d": "2021-02-01", "ds": None}, cfg).whole is ServiceResult.EMPTY
    assert results({"d": "2021-02-01", "ds": "x"}, cfg).whole is ServiceResult.EMPTY


def test_inactive_version_never_passes():
    cfg = FaultConfig(version_policy={"V19/1": "inactive-fail"})
    r = results({"A": 1, "B": 2}, cfg)
    assert r.result_for("V19/1") is ServiceResult.FAIL
    cfg = FaultConfig(version_policy={"V19/1": "inactive-notapplied"})
    assert results({"A": 1, "B": 2}, cfg).result_for("V19/1") is ServiceResult.NOT_APPLIED


def test_warning_and_always_not_applied():
    cfg = FaultConfig(warning_rules=frozenset({"V19"}))
    r = results({"A": 1, "B": 5}, cfg)
    assert r.result_for("V19/1") is ServiceResult.WARNING
    assert r.result_for("V19/2") is ServiceResult.WARNING
    cfg = FaultConfig(always_not_applied_rules=frozenset({"V19"}))
    assert results({"A": 1, "B": 2}, cfg).result_for("V19/1") is ServiceResult.NOT_APPLIED


def test_eval_error_is_per_rule_500():
    r = results({"A": 1, "B": 2, "t": "ab"}, FaultConfig.empty())
    assert r.result_for("V20/1") is ServiceResult.HTTP_500
    assert r.result_for("V19/1") is ServiceResult.PASS


def test_missing_rule_is_empty():
    r = results({"A": 1}, FaultConfig.empty())
    assert r.result_for("V99/1") is ServiceResult.EMPTY


def test_fault_config_json_and_check():
    cfg = FaultConfig(version_policy={"V19/1": "inactive-fail"}, warning_rules=frozenset({"V19"}))
    assert FaultConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(ValueError):
        FaultConfig(version_policy={"V19/1": "sometimes"})
    with pytest.raises(ValueError):
        FaultConfig(warning_rules=frozenset({"V77"})).check(RULES, SCHEMA)
    with pytest.raises(ValueError):
        FaultConfig.from_json({"bogus": 1})


messages = st.fixed_dictionaries(
    {},
    optional={
        "A": st.one_of(st.none(), st.integers(0, 2)),
        "B": st.one_of(st.none(), st.integers(1, 3)),
        "t": st.one_of(st.none(), st.text("abx", max_size=6)),
        "d": st.one_of(st.none(), st.just("2020-01-01"), st.just("01-01-2020")),
    },
)


@given(messages)
def test_empty_config_agrees_with_reference(message):
    resp = results(message, FaultConfig.empty())
    for r in RULES:
        ref = validate_raw(r, message, SCHEMA)
        got = resp.result_for(r.key)
        if ref.ok:
            assert got.value == ref.result.value
        else:
            assert got is ServiceResult.HTTP_500


@given(messages)
def test_warning_only_replaces_fail(message):
    plain = results(message, FaultConfig.empty())
    warned = results(message, FaultConfig(strict_date_format=None, warning_rules=frozenset({"V19"})))
    for r in RULES:
        a, b = plain.result_for(r.key), warned.result_for(r.key)
        if r.id == "V19" and a is ServiceResult.FAIL:
            assert b is ServiceResult.WARNING
        else:
            assert a is b


# -- HTTP -------------------------------------------------------------------------


@pytest.fixture
def service():
    with embedded_service(RULES, SCHEMA, FaultConfig(pre_aggregation_vars=frozenset({"ds"}))) as srv:
        yield srv


def test_http_contract(service):
    with httpx.Client() as http:
        assert http.get(service.url + HEALTH_PATH).text == "ok"
        assert http.get(service.url + "/nope").status_code == 404
        bad = http.post(service.url + VALIDATION_PATH, content=b"{not json")
        assert bad.status_code == 400
        assert http.post(service.url + VALIDATION_PATH, content=b"[1]").status_code == 400
        ok = http.post(service.url + VALIDATION_PATH, json={"A": 1, "B": 2, "ds": 1, "t": "abcdef"})
        assert ok.status_code == 200
        body = ok.json()
        assert {(e["ruleId"], e["version"]): e["result"] for e in body} == {
            ("V19", 1): "Pass", ("V19", 2): "Fail", ("V20", 1): "500",
        }
        assert http.post(service.url + VALIDATION_PATH, json={"d": "31-12-2020", "ds": 1}).status_code == 500
        empty = http.post(service.url + VALIDATION_PATH, json={"ds": None})
        assert empty.status_code == 200 and empty.content == b""


def test_http_client_matches_local(service):
    local = LocalServiceClient(RULES, SCHEMA, service.faults)
    with HttpServiceClient(service.url) as client:
        for msg in ({"A": 1, "B": 2, "ds": 1}, {"ds": None}, {"d": "1-1-2020", "ds": 2}, {"A": 0, "ds": 3}):
            remote, here = client.validate(msg), local.validate(msg)
            for r in RULES:
                assert remote.result_for(r.key) is here.result_for(r.key)


def test_unreachable_service():
    with embedded_service(RULES, SCHEMA, FaultConfig.empty()) as srv:
        url = srv.url
    with HttpServiceClient(url, retries=1, backoff=0) as client:
        with pytest.raises(ServiceTransportError):
            client.validate({"A": 1})
