"""Four mock providers of different quality through the full pipeline, with
a seeded-fault service so the ledgers have something to find.

    python3 scripts/run_experiment.py --out runs --reps 30
"""

from __future__ import annotations

import argparse
import json
import logging
import tempfile
from pathlib import Path

from rulediff.corpus import CorpusSpec, generate_corpus
from rulediff.faultseed import older_versions
from rulediff.pipeline import ProviderSpec, RunConfig, run_pipeline
from rulediff.service import FaultConfig

PROVIDERS = [
    ProviderSpec("perfect", "mock", "perfect"),
    ProviderSpec("steady", "mock", "default"),
    ProviderSpec("steady-combined", "mock", "default", combined=True),
    ProviderSpec("sloppy", "mock", "sloppy"),
]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs")
    ap.add_argument("--reps", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--count", type=int, default=20, help="corpus size")
    ap.add_argument("--no-faults", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    with tempfile.TemporaryDirectory() as tmp:
        corpus = generate_corpus(CorpusSpec(count=args.count, seed=42))
        paths = corpus.write(tmp)
        faults = None
        if not args.no_faults:
            # older versions never pass, one id escalates Fail to Warning
            cfg = FaultConfig(
                version_policy={k: "inactive-fail" for k in older_versions(corpus.rules)},
                warning_rules=frozenset({corpus.rules[-1].id}),
            )
            faults = Path(tmp) / "faults.json"
            faults.write_text(json.dumps(cfg.to_json(), indent=2))
        run = run_pipeline(
            RunConfig(
                out_dir=Path(args.out),
                rules=paths["rules"],
                schema=paths["schema"],
                template=paths["template"],
                faults=faults,
                providers=PROVIDERS,
                reps=args.reps,
                seed=args.seed,
                serve_embedded=True,
            )
        )
    print((run / "report.txt").read_text())
    print(f"artifacts in {run}")


if __name__ == "__main__":
    main()
