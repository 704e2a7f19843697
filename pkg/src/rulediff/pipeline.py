"""End-to-end runs: corpus, mutate, generate, diff, metrics, stats, report.

Every run writes into a fresh ``run-NNNN`` directory. Each stage reads its
inputs from files written by earlier stages, and ``manifest.json`` records
the configuration plus two hashes per artifact: one over the raw bytes and
one over the content with latency-derived fields removed, which is what
identical seeded runs agree on.
"""

from __future__ import annotations

import contextlib
import csv
import dataclasses
import hashlib
import io
import json
import logging
import re
import stat
from collections import Counter
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import __version__, difftest, metrics, stats
from .corpus import CorpusSpec, generate_corpus
from .mutation import mutant_map, mutate_all
from .rules import Rule, dump_rules, load_rules, load_schema, rules_from_json, typecheck
from .service import FaultConfig, HttpServiceClient, ServiceClient, embedded_service
from .testgen import (
    DEFAULT_REPS,
    DEFAULT_TEMPERATURE,
    GeneratedTestSet,
    HallucinationReport,
    HttpChatProvider,
    MockProvider,
    MockScenario,
    Provider,
    ProviderConfigError,
    TransportFailure,
    generate_all,
    read_records,
)

log = logging.getLogger(__name__)

STAGES = ("corpus", "mutate", "generate", "diff", "metrics", "stats", "report")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class ProviderSpec:
    name: str
    kind: str = "mock"  # mock | http
    scenario: str = "default"  # builtin scenario name or a JSON file path
    combined: bool = False

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "http"):
            raise ConfigError(f"provider {self.name!r}: kind must be 'mock' or 'http'")
        if not re.fullmatch(r"[A-Za-z0-9_.-]+", self.name):
            raise ConfigError(f"provider name {self.name!r} must be file-name safe")


@dataclass
class RunConfig:
    out_dir: Path = Path("runs")
    rules: Path | None = None  # None: generate a corpus
    schema: Path | None = None
    template: Path | None = None
    faults: Path | None = None  # None: no seeded faults
    providers: list[ProviderSpec] = field(default_factory=lambda: [ProviderSpec("mock")])
    reps: int = DEFAULT_REPS
    temperature: float = DEFAULT_TEMPERATURE
    alpha: float = stats.DEFAULT_ALPHA
    seed: int = 0
    service_url: str | None = None
    serve_embedded: bool = False
    workers: int = 4
    retry_backoff: float = 0.5
    corpus_count: int = 10
    corpus_seed: int = 42
    metrics: list[str] = field(default_factory=lambda: list(metrics.METRIC_NAMES))
    stages: list[str] = field(default_factory=lambda: list(STAGES))
    from_run: Path | None = None

    _PATHS = ("out_dir", "rules", "schema", "template", "faults", "from_run")

    @classmethod
    def from_json(cls, data: dict[str, Any], base: Path | None = None) -> RunConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(data)
        for key in cls._PATHS:
            if kw.get(key) is not None:
                p = Path(kw[key])
                kw[key] = p if p.is_absolute() or base is None else base / p
        if "providers" in kw:
            kw["providers"] = [ProviderSpec(**p) for p in kw["providers"]]
        return cls(**kw)

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_json(data, base=path.parent)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Path):
                v = str(v)
            elif f.name == "providers":
                v = [dataclasses.asdict(p) for p in v]
            out[f.name] = v
        return out

    def validate(self) -> None:
        """Fail fast, before any stage runs."""
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        bad = [s for s in self.stages if s not in STAGES]
        if bad or not self.stages:
            raise ConfigError(f"unknown stages {bad}; choose from {', '.join(STAGES)}")
        for m in self.metrics:
            if m not in metrics.METRIC_NAMES:
                raise ConfigError(f"unknown metric {m!r}")
        if not self.providers:
            raise ConfigError("at least one provider is required")
        if len({p.name for p in self.providers}) != len(self.providers):
            raise ConfigError("provider names must be unique")
        given = [self.rules, self.schema, self.template]
        if any(given) and not all(given):
            raise ConfigError("rules, schema and template must be given together")
        for p in [*given, self.faults]:
            if p is not None and not p.is_file():
                raise ConfigError(f"missing input file {p}")
        if self.from_run is not None and not (self.from_run / "manifest.json").is_file():
            raise ConfigError(f"{self.from_run} is not a run directory")
        if self.from_run is None and self.stages != [s for s in STAGES if s in self.stages]:
            raise ConfigError("stages must be listed in pipeline order")
        if self.from_run is None and self.stages[0] != "corpus":
            raise ConfigError("a partial run needs --from-run with the upstream artifacts")
        if "diff" in self.stages and not self.service_url and not self.serve_embedded:
            raise ConfigError("the diff stage needs a service URL or --serve-embedded")
        for p in self.providers:
            if p.kind == "mock" and (p.scenario.endswith(".json") and not Path(p.scenario).is_file()):
                raise ConfigError(f"missing mock scenario {p.scenario}")


# -- artifacts ------------------------------------------------------------------

_VOLATILE_KEYS = {"latency", "t_infer"}


def _strip_volatile(value: Any) -> Any:
    if isinstance(value, dict):
        if value.get("metric") == "t_infer":
            return None
        return {k: _strip_volatile(v) for k, v in value.items() if k not in _VOLATILE_KEYS}
    if isinstance(value, list):
        return [x for x in (_strip_volatile(v) for v in value) if x is not None]
    return value


def stable_bytes(path: Path) -> bytes:
    """Artifact content with latency-derived fields removed."""
    data = path.read_bytes()
    suffix = path.suffix
    if suffix == ".jsonl":
        lines = [json.dumps(_strip_volatile(json.loads(line)), sort_keys=True) for line in data.decode().splitlines() if line.strip()]
        return "\n".join(lines).encode()
    if suffix == ".json":
        return json.dumps(_strip_volatile(json.loads(data)), sort_keys=True).encode()
    if suffix == ".csv":
        rows = list(csv.reader(io.StringIO(data.decode())))
        if not rows:
            return b""
        header = rows[0]
        keep = [i for i, h in enumerate(header) if h not in _VOLATILE_KEYS]
        metric_col = header.index("metric") if "metric" in header else None
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in rows:
            if metric_col is not None and row[metric_col] == "t_infer":
                continue
            w.writerow([row[i] for i in keep])
        return buf.getvalue().encode()
    if suffix == ".txt":
        return b"\n".join(line for line in data.splitlines() if b"t_infer" not in line)
    return data


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def artifact_hashes(path: Path) -> dict[str, str]:
    return {"sha256": sha256(path.read_bytes()), "stable_sha256": sha256(stable_bytes(path))}


class RunDir:
    def __init__(self, root: Path):
        self.root = root
        self.artifacts: dict[str, dict[str, str]] = {}

    @classmethod
    def create(cls, out_dir: Path) -> RunDir:
        out_dir.mkdir(parents=True, exist_ok=True)
        taken = [int(m.group(1)) for p in out_dir.iterdir() if (m := re.fullmatch(r"run-(\d{4,})", p.name))]
        n = max(taken, default=0) + 1
        root = out_dir / f"run-{n:04d}"
        root.mkdir()
        return cls(root)

    def path(self, name: str) -> Path:
        return self.root / name

    def write(self, name: str, text: str) -> Path:
        p = self.path(name)
        if p.exists():
            raise FileExistsError(f"artifact {name} already written")
        p.write_text(text)
        p.chmod(stat.S_IRUSR | stat.S_IRGRP | stat.S_IROTH)
        self.artifacts[name] = artifact_hashes(p)
        return p

    def adopt(self, name: str, source: Path, expected: dict[str, str]) -> None:
        actual = artifact_hashes(source)
        if actual["sha256"] != expected["sha256"]:
            raise ConfigError(f"artifact {source} does not match its manifest hash (modified since written)")
        self.write(name, source.read_text())

    def read(self, name: str) -> str:
        p = self.path(name)
        if not p.is_file():
            raise FileNotFoundError(f"artifact {name} missing; run the stage that produces it first")
        recorded = self.artifacts.get(name)
        if recorded and sha256(p.read_bytes()) != recorded["sha256"]:
            raise RuntimeError(f"artifact {name} changed after it was written")
        return p.read_text()


def verify_run(run_dir: str | Path) -> list[str]:
    """Artifacts whose content no longer matches the manifest."""
    root = Path(run_dir)
    manifest = json.loads((root / "manifest.json").read_text())
    bad = []
    for name, h in manifest["artifacts"].items():
        p = root / name
        if not p.is_file() or sha256(p.read_bytes()) != h["sha256"]:
            bad.append(name)
    return bad


# -- stages ---------------------------------------------------------------------


def _provider(spec: ProviderSpec, schema: dict[str, str]) -> Provider:
    if spec.kind == "http":
        return HttpChatProvider.from_env(combined=spec.combined, name=spec.name)
    if spec.scenario.endswith(".json"):
        scenario = MockScenario.load(spec.scenario)
    else:
        try:
            scenario = MockScenario.builtin(spec.scenario)
        except FileNotFoundError as exc:
            raise ConfigError(f"unknown builtin mock scenario {spec.scenario!r}") from exc
    return MockProvider(schema, scenario, name=spec.name, combined=spec.combined)


def provider_seed(seed: int, name: str) -> int:
    return int(sha256(f"{seed}:{name}".encode())[:12], 16)


def _gen_name(p: ProviderSpec) -> str:
    return f"generations-{p.name}.jsonl"


@contextlib.contextmanager
def _service(cfg: RunConfig, rules: Sequence[Rule], schema: dict[str, str], faults: FaultConfig) -> Iterator[ServiceClient]:
    if cfg.service_url:
        with HttpServiceClient(cfg.service_url) as client:
            yield client
        return
    with embedded_service(rules, schema, faults) as server, HttpServiceClient(server.url) as client:
        yield client


class _Run:
    def __init__(self, cfg: RunConfig, rd: RunDir):
        self.cfg = cfg
        self.rd = rd

    # inputs
    def rules(self) -> list[Rule]:
        return rules_from_json(json.loads(self.rd.read("rules.json")))

    def schema(self) -> dict[str, str]:
        return json.loads(self.rd.read("schema.json"))

    def template(self) -> dict[str, Any]:
        return json.loads(self.rd.read("template.json"))

    def mutants(self) -> list[Rule]:
        return rules_from_json(json.loads(self.rd.read("mutants.json")))

    def faults(self) -> FaultConfig:
        return FaultConfig.from_json(json.loads(self.rd.read("faults.json")))

    # stages
    def corpus(self) -> None:
        cfg = self.cfg
        if cfg.rules is not None:
            rules = load_rules(cfg.rules)
            schema = load_schema(cfg.schema)
            template = json.loads(cfg.template.read_text())
            for r in rules:
                diags = typecheck(r.expression, schema)
                if diags:
                    raise ValueError(f"rule {r.key} does not typecheck: {diags[0].message}")
        else:
            c = generate_corpus(CorpusSpec(count=cfg.corpus_count, seed=cfg.corpus_seed))
            rules, schema, template = c.rules, c.schema, c.template
        faults = FaultConfig.load(cfg.faults) if cfg.faults else FaultConfig.empty()
        faults.check(rules, schema)
        self.rd.write("rules.json", dump_rules(rules))
        self.rd.write("schema.json", json.dumps(schema, indent=2) + "\n")
        self.rd.write("template.json", json.dumps(template, indent=2) + "\n")
        self.rd.write("faults.json", json.dumps(faults.to_json(), indent=2) + "\n")

    def mutate(self) -> None:
        mutants = mutate_all(self.rules())
        self.rd.write("mutants.json", dump_rules(m.as_rule() for m in mutants))
        mapping = {m.as_rule().key: m.source_key for m in mutants}
        assert mapping == mutant_map(mutants)
        self.rd.write("mutant_map.json", json.dumps(mapping, indent=2) + "\n")

    def generate(self) -> None:
        cfg = self.cfg
        schema = self.schema()
        targets = self.rules() + self.mutants()
        for spec in cfg.providers:
            provider = _provider(spec, schema)
            records = generate_all(
                targets, provider, cfg.reps, cfg.temperature, provider_seed(cfg.seed, spec.name),
                # a mock has no transport to recover, so waiting is pointless
                workers=cfg.workers, backoff=cfg.retry_backoff if spec.kind == "http" else 0.0,
            )
            buf = io.StringIO()
            for r in records:
                buf.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
            self.rd.write(_gen_name(spec), buf.getvalue())

    def diff(self) -> None:
        cfg = self.cfg
        rules, schema, template = self.rules(), self.schema(), self.template()
        originals = {r.key for r in rules}
        with _service(cfg, rules, schema, self.faults()) as client:
            for spec in cfg.providers:
                gens = [g for g in read_records(self.rd.path(_gen_name(spec))) if g.rule_key in originals]
                run = difftest.run_tests(difftest.cases_from_generations(gens), rules, template, schema, client, cfg.workers)
                if run.infra_failures and not run.records:
                    raise RuntimeError(f"no test reached the service ({len(run.infra_failures)} failures); is it running?")
                if run.infra_failures:
                    log.warning("%d infrastructure failures excluded for %s", len(run.infra_failures), spec.name)
                buf = io.StringIO()
                for r in run.records:
                    buf.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
                self.rd.write(f"diff-{spec.name}.jsonl", buf.getvalue())
                led = difftest.ledger(run.records)
                summary = {"provider": spec.name, "infra_failures": run.infra_failures, **led.to_json()}
                self.rd.write(f"ledger-{spec.name}.json", json.dumps(summary, indent=2) + "\n")
                self.rd.write(f"ledger-{spec.name}.csv", led.to_csv())

    def metrics(self) -> None:
        rules, schema, mutants = self.rules(), self.schema(), self.mutants()
        mapping = json.loads(self.rd.read("mutant_map.json"))
        rows = []
        for spec in self.cfg.providers:
            gens = read_records(self.rd.path(_gen_name(spec)))
            rows += metrics.compute_metrics(spec.name, rules, mutants, mapping, gens, schema)
            diff_name = f"diff-{spec.name}.jsonl"
            if self.rd.path(diff_name).is_file():
                tally = metrics.tallies(gens, rules + mutants, schema)
                problems = metrics.cross_check(tally, difftest.read_records(self.rd.path(diff_name)))
                if problems:
                    raise RuntimeError("metrics disagree with diff records: " + "; ".join(problems[:5]))
        self.rd.write("metrics.csv", metrics.to_csv(rows))

    def stats(self) -> None:
        rows = metrics.from_csv(self.rd.read("metrics.csv"))
        reports = []
        for name in self.cfg.metrics:
            samples = metrics.metric_samples(rows, name)
            if len(samples) < 2:
                continue
            groups = [stats.SampleGroup(p.name, samples[p.name]) for p in self.cfg.providers if p.name in samples]
            reports.append(stats.compare_all(groups, self.cfg.alpha, lower_is_better=(name == "t_infer"), metric=name))
        self.rd.write("stats.csv", stats.to_csv(reports))

    def report(self) -> None:
        cfg = self.cfg
        rows = metrics.from_csv(self.rd.read("metrics.csv"))
        originals = {r.key for r in self.rules()}
        providers = []
        text = []
        for spec in cfg.providers:
            gens = [g for g in read_records(self.rd.path(_gen_name(spec))) if g.rule_key in originals]
            kinds = Counter()
            for g in gens:
                if isinstance(g.outcome, GeneratedTestSet):
                    kinds["ExactMatch"] += 1
                elif isinstance(g.outcome, HallucinationReport):
                    kinds[g.outcome.label] += 1
                elif isinstance(g.outcome, TransportFailure):
                    kinds["TransportFailure"] += 1
            mine = [r for r in rows if r.provider == spec.name]
            means = {}
            for t in metrics.TEST_TYPES:
                sel = [r for r in mine if r.test_type is t]
                ri = [r.ri for r in sel if r.ri is not None]
                means[t.value] = {
                    "SI": round(sum(r.si for r in sel) / len(sel), 6) if sel else None,
                    "RI": round(sum(ri) / len(ri), 6) if ri else None,
                }
            cr = [r.cr for r in mine if r.test_type is metrics.TEST_TYPES[0]]
            entry: dict[str, Any] = {
                "provider": spec.name,
                "generations": len(gens),
                "outcomes": dict(sorted(kinds.items())),
                "mean_CR": round(sum(cr) / len(cr), 6) if cr else None,
                "mean": means,
                "t_infer": round(sum(r.t_infer for r in mine) / len(mine), 6) if mine else None,
            }
            ledger_name = f"ledger-{spec.name}.json"
            if self.rd.path(ledger_name).is_file():
                entry["ledger"] = json.loads(self.rd.read(ledger_name))
            providers.append(entry)

            text.append(f"== {spec.name} ==")
            text.append(f"generations: {len(gens)}  mean CR: {entry['mean_CR']}")
            text.append("outcomes: " + ", ".join(f"{k}={v}" for k, v in entry["outcomes"].items()))
            for t, m in means.items():
                text.append(f"  {t:<11} mean SI {m['SI']}  mean RI(%) {m['RI']}")
            if "ledger" in entry:
                led = difftest.ledger(difftest.read_records(self.rd.path(f"diff-{spec.name}.jsonl")))
                text.append(led.to_text())
            text.append("")

        comparisons = []
        if self.rd.path("stats.csv").is_file():
            comparisons = list(csv.DictReader(io.StringIO(self.rd.read("stats.csv"))))
            text.append("== comparisons ==")
            text.extend(
                f"{c['metric']:<14} {c['model1']:<12} {c['model2']:<12} {c['comparison']:<8} p={c['p']} A12={c['A12']} {c['magnitude']}"
                if c["model1"] else f"{c['metric']:<14} omnibus H={c['H']} p={c['p_omnibus']} (no post-hoc)"
                for c in comparisons
            )
        report = {"seed": cfg.seed, "reps": cfg.reps, "alpha": cfg.alpha, "providers": providers, "comparisons": comparisons}
        self.rd.write("report.json", json.dumps(report, indent=2) + "\n")
        self.rd.write("report.txt", "\n".join(text) + "\n")


_PRODUCES = {
    "corpus": lambda cfg: ["rules.json", "schema.json", "template.json", "faults.json"],
    "mutate": lambda cfg: ["mutants.json", "mutant_map.json"],
    "generate": lambda cfg: [_gen_name(p) for p in cfg.providers],
    "diff": lambda cfg: [f"{k}-{p.name}.{e}" for p in cfg.providers for k, e in (("diff", "jsonl"), ("ledger", "json"), ("ledger", "csv"))],
    "metrics": lambda cfg: ["metrics.csv"],
    "stats": lambda cfg: ["stats.csv"],
    "report": lambda cfg: ["report.json", "report.txt"],
}


def _write_manifest(cfg: RunConfig, rd: RunDir, done: list[str], failed: str | None) -> None:
    manifest = {
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.to_json(),
        "stages": done,
        "failed_stage": failed,
        "artifacts": dict(sorted(rd.artifacts.items())),
    }
    p = rd.path("manifest.json")
    if p.exists():
        p.chmod(stat.S_IRUSR | stat.S_IWUSR)
    p.write_text(json.dumps(manifest, indent=2) + "\n")


def run_pipeline(cfg: RunConfig) -> Path:
    """Run the configured stages into a new run directory and return it."""
    cfg.validate()
    rd = RunDir.create(cfg.out_dir)
    log.info("run directory %s", rd.root)

    if cfg.from_run is not None:
        prior = json.loads((cfg.from_run / "manifest.json").read_text())
        wanted = set(cfg.stages)
        for stage in STAGES:
            if stage in wanted:
                continue
            for name in _PRODUCES[stage](cfg):
                if name in prior["artifacts"]:
                    rd.adopt(name, cfg.from_run / name, prior["artifacts"][name])

    run = _Run(cfg, rd)
    done: list[str] = []
    for stage in STAGES:
        if stage not in cfg.stages:
            continue
        log.info("stage %s", stage)
        try:
            getattr(run, stage)()
        except ProviderConfigError as exc:
            _write_manifest(cfg, rd, done, stage)
            raise ConfigError(str(exc)) from exc
        except ConfigError:
            _write_manifest(cfg, rd, done, stage)
            raise
        except Exception as exc:  # noqa: BLE001 - reported with the stage name
            _write_manifest(cfg, rd, done, stage)
            raise StageError(stage, exc) from exc
        done.append(stage)
    _write_manifest(cfg, rd, done, None)
    return rd.root


def stable_digest(run_dir: str | Path) -> dict[str, str]:
    """Stable hash per artifact; equal across runs with the same seed."""
    manifest = json.loads((Path(run_dir) / "manifest.json").read_text())
    return {name: h["stable_sha256"] for name, h in manifest["artifacts"].items()}

