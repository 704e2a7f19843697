import random

from rulediff.rules import categorize, typecheck, unparse, parse, variables

from oracle import SCHEMA, assignments, oracle_category, random_rule


def test_categorize_matches_truth_table():
    rng = random.Random(20240)
    pairs = 0
    for _ in range(500):
        rule = random_rule(rng)
        assert typecheck(rule, SCHEMA) == []
        # the rule also survives the text form
        assert parse(unparse(rule)) == rule
        names = variables(rule)
        assert len(names) <= 4
        for rec in assignments(names):
            assert categorize(rule, rec).value == oracle_category(rule, rec), (unparse(rule), rec)
            pairs += 1
    assert pairs > 500
