"""Regenerate the checked-in golden files under tests/golden.

Each golden comes from a computation that does not reuse the code it will
check:

* mutation site counts: a regex token counter over the rule source text;
* Dunn/BY p values: scipy ranks and normal tail, statsmodels' fdr_by;
* the combined-fault ledger: a standalone replay of the match rule and the
  per-category set accounting over the stored diff records;
* corpus witnesses: each one re-categorized before it is written.

Run from the repository root: ``python scripts/make_goldens.py``. Review the
diff before committing.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import re
import sys
import tempfile
from pathlib import Path

import numpy as np
from scipy import stats as sps
from statsmodels.stats.multitest import multipletests

from rulediff.corpus import CorpusSpec, generate_corpus, oracle_tests
from rulediff.difftest import cases_from_tests, run_tests
from rulediff.faultseed import seed
from rulediff.pipeline import ProviderSpec, RunConfig, run_pipeline, stable_bytes
from rulediff.rules import TriState, categorize, coerce_record
from rulediff.service import HttpServiceClient, embedded_service

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = ROOT / "tests" / "golden"

COMBINED_CLASSES = {
    "version-fail": ["V02/1"],
    "version-notapplied": ["V05/1"],
    "date-format": ["V03/1"],
    "pre-aggregation": ["V04/1"],
    "warning": ["V07/1"],
    "always-notapplied": ["V08/1"],
}

DUNN_FIXTURE = {
    "a": [2.9, 3.0, 2.5, 2.6, 3.2, 3.0, 2.8],
    "b": [3.8, 2.7, 4.0, 2.4, 3.0, 3.9],
    "c": [2.8, 3.4, 3.7, 2.2, 2.0, 3.7, 4.1, 3.6],
}

PIPELINE_PROVIDERS = [ProviderSpec("alpha", "mock", "default"), ProviderSpec("beta", "mock", "sloppy")]
PIPELINE_REPS = 5
PIPELINE_SEED = 7


# -- mutation sites by token counting ---------------------------------------------


def count_sites(text: str) -> dict[str, int]:
    subs = [(int(i), int(j)) for i, j in re.findall(r"substring\(\s*\w+\s*,\s*(\d+)\s*,\s*(\d+)\s*\)", text)]
    dates = len(re.findall(r"\bdate\(", text))
    bare = re.sub(r"'[^']*'", "''", text)  # literals cannot contain operators
    return {
        "ACO": len(re.findall(r"<=|>=|<|>", bare)),
        "AD": dates,
        "CO": len(re.findall(r"\b(?:and|or)\b", bare)),
        "NI": len(re.findall(r"!=|(?<![<>!])=", bare)),
        "RI": len(re.findall(r"\b(?:in|notIn)\b", bare)),
        "RSE": len(re.findall(r"\b(?:startswith|endswith)\b", bare)),
        "SR": len(re.findall(r"\bimplies\b", bare)),
        "SSI": sum(1 for i, j in subs if i != j),
    }


# -- Dunn + BY --------------------------------------------------------------------


def dunn_by(groups: dict[str, list[float]]) -> dict:
    labels = list(groups)
    values = np.concatenate([groups[k] for k in labels])
    ranks = sps.rankdata(values)
    n = len(values)
    _, counts = np.unique(values, return_counts=True)
    tie = float(((counts**3) - counts).sum())
    var = n * (n + 1) / 12 - tie / (12 * (n - 1))
    mean_rank, pos = {}, 0
    for k in labels:
        m = len(groups[k])
        mean_rank[k] = ranks[pos : pos + m].mean()
        pos += m
    pairs, raw = [], []
    for a, b in itertools.combinations(labels, 2):
        z = (mean_rank[a] - mean_rank[b]) / np.sqrt(var * (1 / len(groups[a]) + 1 / len(groups[b])))
        pairs.append([a, b])
        raw.append(float(2 * sps.norm.sf(abs(z))))
    adjusted = multipletests(raw, method="fdr_by")[1]
    h, p = sps.kruskal(*[groups[k] for k in labels])
    return {"groups": groups, "H": float(h), "p": float(p), "pairs": pairs, "p_raw": raw, "p_adjusted": [float(x) for x in adjusted]}


# -- ledger replay ----------------------------------------------------------------

CATEGORIES = ["Pass", "Fail", "NotApplied", "Warning", "500", "Empty Response"]


def replay_ledger(lines: list[dict]) -> str:
    executed = {f"{d['rule_id']}/{d['version']}" for d in lines}
    bad = {c: set() for c in CATEGORIES}
    for d in lines:
        ref = d["ref"].get("result")
        if ref != d["service"]:
            bad[d["service"]].add(f"{d['rule_id']}/{d['version']}")
    versions: dict[str, set[int]] = {}
    for k in executed:
        rid, v = k.split("/")
        versions.setdefault(rid, set()).add(int(v))

    def label(k: str) -> str:
        rid, _ = k.split("/")
        return k if len(versions[rid]) > 1 else rid

    def order(k: str):
        rid, v = k.split("/")
        return (rid, int(v))

    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["category", "match", "match_pct", "mismatch", "mismatched_rules"])
    for c in CATEGORIES:
        match = len(executed) - len(bad[c])
        pct = int(100 * match / len(executed) + 0.5)
        w.writerow([c, match, pct, len(bad[c]), " ".join(label(k) for k in sorted(bad[c], key=order))])
    return out.getvalue()


# -- witness check ----------------------------------------------------------------


def check_witnesses(corpus, tests) -> None:
    for rule in corpus.rules:
        ts = tests[rule.key]
        for t in TriState:
            got = categorize(rule.expression, coerce_record(ts.case(t), corpus.schema))
            if got is not t:
                sys.exit(f"witness for {rule.key} {t.value} categorizes as {got.value}")


def main() -> None:
    GOLDEN.mkdir(parents=True, exist_ok=True)

    corpus = generate_corpus(CorpusSpec(count=10, seed=42))
    corpus.write(GOLDEN / "corpus")
    tests = {r.key: oracle_tests(r, corpus.schema) for r in corpus.rules}
    check_witnesses(corpus, tests)
    (GOLDEN / "corpus" / "witnesses.json").write_text(
        json.dumps({k: v.to_json() for k, v in tests.items()}, indent=2) + "\n"
    )

    counts = {r.key: count_sites(r.text) for r in corpus.rules}
    # six date deltas per AD site, one mutant per site for everything else
    total = sum(n * (6 if op == "AD" else 1) for c in counts.values() for op, n in c.items())
    (GOLDEN / "mutation_counts.json").write_text(json.dumps({"sites": counts, "mutants": total}, indent=2) + "\n")

    (GOLDEN / "dunn_by.json").write_text(json.dumps(dunn_by(DUNN_FIXTURE), indent=2) + "\n")

    seeding = seed(COMBINED_CLASSES, corpus.rules, corpus.schema, corpus.template, tests)
    with embedded_service(corpus.rules, corpus.schema, seeding.faults) as srv, HttpServiceClient(srv.url) as client:
        run = run_tests(cases_from_tests(seeding.tests), corpus.rules, corpus.template, corpus.schema, client)
    lines = [r.to_json() for r in run.records]
    (GOLDEN / "combined_faults.json").write_text(json.dumps({"classes": COMBINED_CLASSES, "faults": seeding.faults.to_json()}, indent=2) + "\n")
    (GOLDEN / "combined_diff.jsonl").write_text("".join(json.dumps(d, sort_keys=True) + "\n" for d in lines))
    (GOLDEN / "combined_ledger.csv").write_text(replay_ledger(lines))

    with tempfile.TemporaryDirectory() as tmp:
        cfg = RunConfig(
            out_dir=Path(tmp),
            rules=GOLDEN / "corpus" / "rules.json",
            schema=GOLDEN / "corpus" / "schema.json",
            template=GOLDEN / "corpus" / "template.json",
            providers=PIPELINE_PROVIDERS,
            reps=PIPELINE_REPS,
            seed=PIPELINE_SEED,
            serve_embedded=True,
        )
        run_dir = run_pipeline(cfg)
        report = json.loads(stable_bytes(run_dir / "report.json"))
    (GOLDEN / "pipeline_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"goldens written to {GOLDEN}")


if __name__ == "__main__":
    main()
