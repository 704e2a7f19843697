import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rulediff.metrics import (
    GenerationTally,
    completion_rate,
    compute_metrics,
    from_csv,
    metric_samples,
    robustness_index,
    success_index,
    tallies,
    to_csv,
)
from rulediff.mutation import mutant_map, mutate_all
from rulediff.rules import Rule, TriState
from rulediff.testgen import GeneratedTestSet, GenerationRecord, TransportFailure


def test_completion_rate():
    assert completion_rate(30, 30) == 1.0
    assert completion_rate(0, 30) == 0.0
    assert completion_rate(27, 30) == pytest.approx(0.9)
    with pytest.raises(ValueError):
        completion_rate(31, 30)


def test_success_index_examples():
    assert success_index(25, 15, 30) == pytest.approx(62.732, abs=1e-3)
    assert success_index(30, 30, 30) == 100
    assert success_index(0, 0, 30) == 0
    with pytest.raises(ValueError):
        success_index(10, 11, 30)


@given(st.integers(1, 60), st.data())
def test_success_index_bounds_and_monotone(t, data):
    observed = data.draw(st.integers(0, t))
    true = data.draw(st.integers(0, observed))
    si = success_index(observed, true, t)
    assert 0 <= si <= 100
    if true < observed:
        assert success_index(observed, true + 1, t) > si
    if observed < t:
        assert success_index(observed + 1, true, t) > si


@given(st.integers(1, 30), st.integers(2, 5), st.data())
def test_success_index_scale_invariant(t, k, data):
    observed = data.draw(st.integers(0, t))
    true = data.draw(st.integers(0, observed))
    assert success_index(observed * k, true * k, t * k) == pytest.approx(success_index(observed, true, t))


def test_robustness_index_examples():
    assert robustness_index(0.9, [0.9, 0.9]) == pytest.approx(1.0)
    assert robustness_index(0.9, [0.8, 1.0]) == pytest.approx(0.9)
    with pytest.raises(ValueError):
        robustness_index(0.9, [])


@given(st.floats(0, 1), st.lists(st.floats(0, 1), min_size=1, max_size=10))
def test_robustness_in_unit_interval(orig, mutated):
    assert 0 <= robustness_index(orig, mutated) <= 1


SCHEMA = {"A": "integer", "B": "integer"}
RULE = Rule.from_text("V01", "A = 1 implies B = 2", 1)
GOOD = GeneratedTestSet({"A": 1, "B": 2}, {"A": 1, "B": 3}, {"A": 0})
SWAPPED = GeneratedTestSet({"A": 1, "B": 3}, {"A": 1, "B": 2}, {"A": 0})


def gen(key_rule, rep, outcome, latency=1.0):
    return GenerationRecord(key_rule.id, key_rule.version, "p", rep, "", outcome, latency)


def test_tallies_count_true_per_slot():
    records = [gen(RULE, 1, GOOD), gen(RULE, 2, SWAPPED), gen(RULE, 3, TransportFailure("x"))]
    tally = tallies(records, [RULE], SCHEMA)
    p = tally[("V01/1", TriState.PASS)]
    assert (p.t_expected, p.em, p.observed, p.true) == (3, 2, 2, 1)
    assert tally[("V01/1", TriState.NOT_APPLIED)].true == 2
    with pytest.raises(ValueError):
        GenerationTally("k", TriState.PASS, 3, 2, 2, 3)


def test_compute_metrics_with_mutants():
    mutants = mutate_all([RULE])
    sources = mutant_map(mutants)
    mrules = [m.as_rule() for m in mutants]
    records = [gen(RULE, i, GOOD, latency=2.0) for i in (1, 2)]
    # mutants receive tests from the same generator; mutant key differs
    for m in mrules:
        records += [gen(m, i, GOOD, latency=1.0) for i in (1, 2)]
    rows = compute_metrics("p", [RULE], mrules, sources, records, SCHEMA)
    assert len(rows) == 3
    for r in rows:
        assert r.cr == 1.0 and r.si == pytest.approx(100)
        assert r.n_rt == len(mutants)
        assert r.t_infer == pytest.approx(2.0)
        assert 0 <= r.ri <= 100
    # by hand: both NI mutants turn the Pass case into a non-Pass, so their
    # SI is 1 - 1/sqrt(2); SR keeps it. RI = 1 - 2(1/sqrt(2))/3
    assert rows[0].ri == pytest.approx(100 * (1 - 2 / (3 * math.sqrt(2))))
    again = from_csv(to_csv(rows))
    assert [(r.rule_key, r.test_type, r.n_rt) for r in again] == [(r.rule_key, r.test_type, r.n_rt) for r in rows]
    assert [r.ri for r in again] == [pytest.approx(r.ri, abs=1e-9) for r in rows]
    assert metric_samples(rows, "SI_fail") == {"p": [pytest.approx(100)]}
    with pytest.raises(ValueError):
        metric_samples(rows, "XX")


def test_csv_without_latency():
    rows = compute_metrics("p", [RULE], [], {}, [gen(RULE, 1, GOOD, latency=3.3)], SCHEMA)
    text = to_csv(rows, latency=False)
    assert "3.3" not in text
    assert all(r.ri is None for r in rows)
