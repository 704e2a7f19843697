"""Command line entry point: ``rulediff <subcommand>``.

Exit codes: 0 success, 1 configuration or input error, 2 stage failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

from . import __version__, difftest, metrics, stats
from .corpus import CorpusSpec, InfeasibleCorpus, generate_corpus
from .mutation import mutant_map, mutate_all
from .pipeline import ConfigError, ProviderSpec, RunConfig, StageError, run_pipeline
from .refengine import validate_raw
from .rules import ParseError, dump_rules, load_rules, load_schema
from .service import FaultConfig, HttpServiceClient, embedded_service, make_server
from .testgen import (
    DEFAULT_REPS,
    DEFAULT_TEMPERATURE,
    HttpChatProvider,
    MockProvider,
    MockScenario,
    ProviderConfigError,
    generate_all,
    read_records,
    write_records,
)

log = logging.getLogger("rulediff")

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 1, 2


def _json_arg(text: str) -> Any:
    p = Path(text)
    return json.loads(p.read_text() if p.is_file() else text)


def _write(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _faults(path: str | None) -> FaultConfig:
    return FaultConfig.load(path) if path else FaultConfig.empty()


# -- subcommands ------------------------------------------------------------------


def cmd_corpus(a: argparse.Namespace) -> int:
    corpus = generate_corpus(CorpusSpec(count=a.count, seed=a.seed if a.seed is not None else 42))
    paths = corpus.write(a.out or ".")
    print("\n".join(str(p) for p in paths.values()))
    return EXIT_OK


def cmd_mutate(a: argparse.Namespace) -> int:
    mutants = mutate_all(load_rules(a.rules))
    _write(a.output, dump_rules(m.as_rule() for m in mutants))
    if a.map:
        _write(a.map, json.dumps(mutant_map(mutants), indent=2) + "\n")
    log.info("%d mutants", len(mutants))
    return EXIT_OK


def cmd_generate(a: argparse.Namespace) -> int:
    rules = load_rules(a.rules)
    if a.mutants:
        rules += load_rules(a.mutants)
    if a.provider == "http":
        provider = HttpChatProvider.from_env(combined=a.combined, name=a.name)
    else:
        scenario = MockScenario.load(a.scenario) if a.scenario.endswith(".json") else MockScenario.builtin(a.scenario)
        provider = MockProvider(load_schema(a.schema), scenario, name=a.name or "mock", combined=a.combined)
    records = generate_all(
        rules, provider, a.reps, a.temperature, a.seed or 0, workers=a.workers,
        backoff=0.0 if a.provider == "mock" else 0.5,
    )
    write_records(records, a.output)
    return EXIT_OK


def cmd_diff(a: argparse.Namespace) -> int:
    rules = load_rules(a.rules)
    schema = load_schema(a.schema)
    template = json.loads(Path(a.template).read_text())
    originals = {r.key for r in rules}
    gens = [g for g in read_records(a.tests) if g.rule_key in originals]
    cases = difftest.cases_from_generations(gens)
    if a.service:
        with HttpServiceClient(a.service) as client:
            run = difftest.run_tests(cases, rules, template, schema, client, a.workers)
    else:
        with embedded_service(rules, schema, _faults(a.faults)) as srv, HttpServiceClient(srv.url) as client:
            run = difftest.run_tests(cases, rules, template, schema, client, a.workers)
    difftest.write_records(run.records, a.output)
    led = difftest.ledger(run.records)
    stem = Path(a.output).with_suffix("")
    Path(f"{stem}.ledger.json").write_text(json.dumps({"infra_failures": run.infra_failures, **led.to_json()}, indent=2) + "\n")
    Path(f"{stem}.ledger.csv").write_text(led.to_csv())
    print(led.to_text())
    return EXIT_OK


def cmd_metrics(a: argparse.Namespace) -> int:
    rules = load_rules(a.rules)
    schema = load_schema(a.schema)
    mutants = load_rules(a.mutants) if a.mutants else []
    mapping = json.loads(Path(a.mutant_map).read_text()) if a.mutant_map else {}
    rows = []
    by_provider: dict[str, list] = {}
    for path in a.generations:
        for g in read_records(path):
            by_provider.setdefault(g.provider, []).append(g)
    for provider, gens in by_provider.items():
        rows += metrics.compute_metrics(provider, rules, mutants, mapping, gens, schema)
    if a.diff:
        diffs = [d for path in a.diff for d in difftest.read_records(path)]
        for provider, gens in by_provider.items():
            tally = metrics.tallies(gens, rules + mutants, schema)
            problems = metrics.cross_check(tally, [d for d in diffs if d.provider == provider])
            for p in problems:
                log.error("%s: %s", provider, p)
            if problems:
                return EXIT_STAGE
    _write(a.output, metrics.to_csv(rows))
    return EXIT_OK


def cmd_stats(a: argparse.Namespace) -> int:
    if a.group_by != "provider":
        raise ConfigError("only --group-by provider is supported")
    rows = metrics.from_csv(Path(a.metrics).read_text())
    reports = []
    for name in a.metric or list(metrics.METRIC_NAMES):
        samples = metrics.metric_samples(rows, name)
        if len(samples) < 2:
            log.warning("%s: fewer than two providers, skipped", name)
            continue
        groups = [stats.SampleGroup(k, v) for k, v in samples.items()]
        reports.append(stats.compare_all(groups, a.alpha, lower_is_better=(name == "t_infer"), metric=name))
    _write(a.output, stats.to_csv(reports))
    if a.output not in (None, "-"):
        print(stats.to_text(reports))
    return EXIT_OK


def cmd_report(a: argparse.Namespace) -> int:
    path = Path(a.run) / "report.txt"
    if not path.is_file():
        raise ConfigError(f"{path} not found; run the report stage first")
    sys.stdout.write(path.read_text())
    return EXIT_OK


def cmd_serve(a: argparse.Namespace) -> int:
    server = make_server(a.host, a.port, load_rules(a.rules), load_schema(a.schema), _faults(a.faults))
    print(f"serving on {server.url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def _run_ref(a: argparse.Namespace) -> int:
    if not (a.rules and a.schema and a.record):
        raise ConfigError("--engine ref needs --rules, --schema and --record")
    schema = load_schema(a.schema)
    record = _json_arg(a.record)
    for rule in load_rules(a.rules):
        if a.rule and a.rule not in (rule.id, rule.key):
            continue
        out = validate_raw(rule, record, schema)
        print(f"{rule.key}\t{out.result.value if out.ok else 'error: ' + out.error}")
    return EXIT_OK


def _provider_spec(text: str) -> ProviderSpec:
    """``NAME`` or ``NAME:SCENARIO`` for a mock, ``NAME:http`` for the HTTP client."""
    name, _, rest = text.partition(":")
    if rest == "http":
        return ProviderSpec(name, "http")
    return ProviderSpec(name, "mock", rest or "default")


def cmd_run(a: argparse.Namespace) -> int:
    if a.engine == "ref":
        return _run_ref(a)
    cfg = RunConfig.load(a.config) if a.config else RunConfig()
    if a.out:
        cfg.out_dir = Path(a.out)
    if a.seed is not None:
        cfg.seed = a.seed
    if a.rules or a.schema or a.template:
        cfg.rules, cfg.schema, cfg.template = (Path(x) if x else None for x in (a.rules, a.schema, a.template))
    if a.faults:
        cfg.faults = Path(a.faults)
    if a.reps:
        cfg.reps = a.reps
    if a.provider:
        cfg.providers = [_provider_spec(p) for p in a.provider]
    if a.service:
        cfg.service_url = a.service
    if a.serve_embedded:
        cfg.serve_embedded = True
    if a.stages:
        cfg.stages = [s.strip() for s in a.stages.split(",") if s.strip()]
    if a.from_run:
        cfg.from_run = Path(a.from_run)
    run_dir = run_pipeline(cfg)
    print(run_dir)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    def global_flags(suppress: bool) -> argparse.ArgumentParser:
        # subcommands repeat the global flags; SUPPRESS keeps them from
        # overwriting values given before the subcommand name
        d = {"default": argparse.SUPPRESS} if suppress else {}
        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--config", help="run configuration (JSON)", **d)
        g.add_argument("--out", help="output directory", **d)
        g.add_argument("--seed", type=int, **d)
        g.add_argument("--verbose", "-v", action="store_true", **d)
        return g

    p = argparse.ArgumentParser(prog="rulediff", description="Differential testing of tri-state validation rules.", parents=[global_flags(False)])
    common = global_flags(True)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name: str, help: str, func) -> argparse.ArgumentParser:  # noqa: A002
        sp = sub.add_parser(name, help=help, parents=[common])
        sp.set_defaults(func=func)
        return sp

    sp = add("corpus", "generate the synthetic rule corpus", cmd_corpus)
    sp.add_argument("--count", type=int, default=10)

    sp = add("mutate", "write all first-order mutants of a registry", cmd_mutate)
    sp.add_argument("--rules", required=True)
    sp.add_argument("--output", "-o", default="-")
    sp.add_argument("--map", help="also write mutant -> source rule map")

    sp = add("generate", "generate tests with a provider", cmd_generate)
    sp.add_argument("--rules", required=True)
    sp.add_argument("--mutants", help="mutant registry to generate for as well")
    sp.add_argument("--schema", required=True)
    sp.add_argument("--provider", choices=("mock", "http"), default="mock")
    sp.add_argument("--scenario", default="default", help="builtin mock scenario or JSON file")
    sp.add_argument("--name", help="provider label in the records")
    sp.add_argument("--combined", action="store_true", help="send system and user parts as one message")
    sp.add_argument("--reps", type=int, default=DEFAULT_REPS)
    sp.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)
    sp.add_argument("--workers", type=int, default=4)
    sp.add_argument("--output", "-o", required=True)

    sp = add("diff", "run generated tests against reference and service", cmd_diff)
    sp.add_argument("--tests", required=True, help="generation records (JSON lines)")
    sp.add_argument("--rules", required=True)
    sp.add_argument("--schema", required=True)
    sp.add_argument("--template", required=True)
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--service", help="base URL of a running service")
    g.add_argument("--serve-embedded", action="store_true")
    sp.add_argument("--faults", help="fault config for the embedded service")
    sp.add_argument("--workers", type=int, default=4)
    sp.add_argument("--output", "-o", required=True)

    sp = add("metrics", "compute CR, SI and RI", cmd_metrics)
    sp.add_argument("--generations", nargs="+", required=True)
    sp.add_argument("--rules", required=True)
    sp.add_argument("--schema", required=True)
    sp.add_argument("--mutants")
    sp.add_argument("--mutant-map")
    sp.add_argument("--diff", nargs="*", help="diff records to cross-check #True against")
    sp.add_argument("--output", "-o", default="-")

    sp = add("stats", "compare providers on a metric", cmd_stats)
    sp.add_argument("--metrics", required=True)
    sp.add_argument("--group-by", default="provider")
    sp.add_argument("--metric", action="append", choices=metrics.METRIC_NAMES)
    sp.add_argument("--alpha", type=float, default=stats.DEFAULT_ALPHA)
    sp.add_argument("--output", "-o", default="-")

    sp = add("report", "print the summary of a run", cmd_report)
    sp.add_argument("run")

    sp = add("serve", "run the simulated rule service", cmd_serve)
    sp.add_argument("--rules", required=True)
    sp.add_argument("--schema", required=True)
    sp.add_argument("--faults")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8080)

    sp = add("run", "run the pipeline (or one engine for debugging)", cmd_run)
    sp.add_argument("--engine", choices=("pipeline", "ref"), default="pipeline")
    sp.add_argument("--rules")
    sp.add_argument("--schema")
    sp.add_argument("--template")
    sp.add_argument("--faults")
    sp.add_argument("--reps", type=int)
    sp.add_argument("--provider", action="append", help="NAME[:SCENARIO] mock provider, or NAME:http")
    sp.add_argument("--service")
    sp.add_argument("--serve-embedded", action="store_true")
    sp.add_argument("--stages", help="comma-separated subset of stages")
    sp.add_argument("--from-run", help="earlier run directory supplying upstream artifacts")
    sp.add_argument("--record", help="(--engine ref) test record, JSON text or file")
    sp.add_argument("--rule", help="(--engine ref) restrict to one rule id or id/version")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except StageError as exc:
        log.error("%s", exc)
        return EXIT_STAGE
    except (ConfigError, ProviderConfigError, InfeasibleCorpus, ParseError, FileNotFoundError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
