import json
import os
from pathlib import Path

import pytest

from rulediff.pipeline import (
    ConfigError,
    ProviderSpec,
    RunConfig,
    StageError,
    run_pipeline,
    stable_bytes,
    stable_digest,
    verify_run,
)

from conftest import GOLDEN

CORPUS = GOLDEN / "corpus"


def config(out, **kw):
    base = dict(
        out_dir=out,
        rules=CORPUS / "rules.json",
        schema=CORPUS / "schema.json",
        template=CORPUS / "template.json",
        providers=[ProviderSpec("alpha", "mock", "default"), ProviderSpec("beta", "mock", "sloppy")],
        reps=5,
        seed=7,
        serve_embedded=True,
    )
    base.update(kw)
    return RunConfig(**base)


@pytest.fixture(scope="module")
def first_run(tmp_path_factory):
    return run_pipeline(config(tmp_path_factory.mktemp("runs")))


def test_report_matches_golden(first_run):
    report = json.loads(stable_bytes(first_run / "report.json"))
    assert report == json.loads((GOLDEN / "pipeline_report.json").read_text())


def test_artifacts_and_manifest(first_run):
    manifest = json.loads((first_run / "manifest.json").read_text())
    assert manifest["stages"] == ["corpus", "mutate", "generate", "diff", "metrics", "stats", "report"]
    assert manifest["failed_stage"] is None
    for name in ("mutants.json", "generations-alpha.jsonl", "diff-beta.jsonl", "ledger-alpha.csv", "metrics.csv", "stats.csv", "report.txt"):
        assert name in manifest["artifacts"], name
    assert verify_run(first_run) == []
    assert not os.access(first_run / "metrics.csv", os.W_OK) or os.geteuid() == 0


def test_same_seed_same_stable_bytes(first_run, tmp_path):
    second = run_pipeline(config(tmp_path))
    assert stable_digest(first_run) == stable_digest(second)
    names = sorted(p.name for p in first_run.iterdir() if p.name != "manifest.json")
    for name in names:
        assert stable_bytes(first_run / name) == stable_bytes(second / name), name


def test_other_seed_differs(first_run, tmp_path):
    other = run_pipeline(config(tmp_path, seed=8))
    assert stable_digest(first_run)["generations-alpha.jsonl"] != stable_digest(other)["generations-alpha.jsonl"]


def test_partial_rerun_from_prior(first_run, tmp_path):
    rerun = run_pipeline(config(tmp_path, stages=["metrics", "stats", "report"], from_run=first_run))
    a, b = stable_digest(first_run), stable_digest(rerun)
    assert a == b


def test_tampered_artifact_is_rejected(first_run, tmp_path):
    import shutil

    copy = tmp_path / "copy"
    shutil.copytree(first_run, copy)
    target = copy / "generations-alpha.jsonl"
    target.chmod(0o644)
    target.write_text(target.read_text().replace('"rep": 1', '"rep": 9', 1))
    assert verify_run(copy) == ["generations-alpha.jsonl"]
    with pytest.raises(ConfigError, match="manifest hash"):
        run_pipeline(config(tmp_path / "out", stages=["diff", "metrics"], from_run=copy))


def test_missing_rules_file_fails_before_any_stage(tmp_path):
    with pytest.raises(ConfigError, match="missing input file"):
        run_pipeline(config(tmp_path, rules=tmp_path / "nope.json"))
    assert not any(tmp_path.iterdir())


@pytest.mark.parametrize(
    "kw",
    [
        {"reps": 0},
        {"alpha": 1.5},
        {"stages": ["bogus"]},
        {"stages": ["metrics"]},
        {"providers": []},
        {"providers": [ProviderSpec("a"), ProviderSpec("a")]},
        {"serve_embedded": False},
        {"schema": None},
    ],
)
def test_invalid_configs(tmp_path, kw):
    with pytest.raises(ConfigError):
        run_pipeline(config(tmp_path, **kw))


def test_http_provider_without_env_is_config_error(tmp_path, monkeypatch):
    for k in ("PROVIDER_API_KEY", "PROVIDER_BASE_URL", "PROVIDER_MODEL"):
        monkeypatch.delenv(k, raising=False)
    with pytest.raises(ConfigError):
        run_pipeline(config(tmp_path, providers=[ProviderSpec("remote", "http")]))
    (run,) = tmp_path.iterdir()
    assert json.loads((run / "manifest.json").read_text())["failed_stage"] == "generate"


def test_unreachable_service_is_stage_error(tmp_path):
    cfg = config(tmp_path, serve_embedded=False, service_url="http://127.0.0.1:9", reps=1, providers=[ProviderSpec("a")])
    with pytest.raises(StageError) as err:
        run_pipeline(cfg)
    assert err.value.stage == "diff"


def test_generated_corpus_and_config_file(tmp_path):
    cfg_file = tmp_path / "run.json"
    cfg_file.write_text(json.dumps({"out_dir": "runs", "reps": 2, "serve_embedded": True, "corpus_count": 6, "providers": [{"name": "m"}]}))
    cfg = RunConfig.load(cfg_file)
    assert cfg.out_dir == tmp_path / "runs"
    run = run_pipeline(cfg)
    assert len(json.loads((run / "rules.json").read_text())) >= 6
    with pytest.raises(ConfigError):
        RunConfig.from_json({"nonsense": 1})
