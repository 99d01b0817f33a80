from __future__ import annotations

import json
import shutil

import pytest

from opal.errors import ConfigError, SourceMissingError, StageError
from opal.gateway import BackendConfig
from opal.pipeline import Job, JobStore, RunConfig, run_pipeline

NO_LOGPROB_REPLY = {
    "text": "```cpp\nint x;\n```\noptimizations = []\n",
    "model": "mock-model",
    "finished": True,
}


@pytest.fixture
def mock_fixtures(tmp_path, fixtures_dir):
    target = tmp_path / "mock-fixtures"
    target.mkdir()
    shutil.copyfile(
        fixtures_dir / "completions" / "default.json", target / "default.json"
    )
    return target


@pytest.fixture
def config(mock_fixtures):
    return RunConfig(
        backend=BackendConfig(mode="mock", fixtures_dir=str(mock_fixtures)),
    )


@pytest.fixture
def profile_paths(fixtures_dir):
    return {
        "pc": fixtures_dir / "accuracy_pc.json",
        "roofline": fixtures_dir / "accuracy_roofline_nvidia.csv",
        "counters": fixtures_dir / "accuracy_counters.csv",
        "counter_dict": fixtures_dir / "counter_dictionary.json",
    }


def _run(tmp_path, fixtures_dir, config, profile_paths, sources, name="job"):
    return run_pipeline(
        fixtures_dir / "accuracy.cu",
        sources,
        profile_paths,
        "NVIDIA H100",
        "(8192,5000,10,100)",
        config,
        tmp_path / name,
    )


def test_all_sources_done_with_artifacts(tmp_path, fixtures_dir, config, profile_paths):
    job = _run(tmp_path, fixtures_dir, config, profile_paths, ["pc", "ia", "roofline"])
    assert job.state == "done"
    job_dir = tmp_path / "job"
    for key in ("kernel", "stalls", "roofline", "counters", "importance", "insights",
                "prompt", "prompt_text", "completion", "result", "beliefs",
                "optimized_code"):
        assert key in job.outputs, key
        assert (job_dir / job.outputs[key]).is_file(), key
    assert job.outputs["optimized_code"] == "accuracy.optimized.cu"
    assert set(job.timings) == {
        "ingest", "importance", "insights", "prompt", "generate", "parse", "beliefs",
    }
    state = json.loads((job_dir / "job.json").read_text())
    assert state["state"] == "done"


def test_zero_sources_still_done(tmp_path, fixtures_dir, config, profile_paths):
    job = _run(tmp_path, fixtures_dir, config, {}, [], name="empty")
    assert job.state == "done"
    prompt = (tmp_path / "empty" / "prompt.txt").read_text()
    assert "roofline_summary" not in prompt
    assert "stall_analysis_summary" not in prompt
    assert "key_hardware_events" not in prompt
    assert "importance" not in job.outputs


def test_missing_counters_fails_before_any_work(tmp_path, fixtures_dir, config, profile_paths):
    paths = dict(profile_paths)
    del paths["counters"]
    with pytest.raises(SourceMissingError):
        _run(tmp_path, fixtures_dir, config, paths, ["ia"], name="missing")
    assert not (tmp_path / "missing").exists()


def test_unknown_source_rejected(tmp_path, fixtures_dir, config, profile_paths):
    with pytest.raises(ConfigError):
        _run(tmp_path, fixtures_dir, config, profile_paths, ["bogus"])


def test_rerun_is_byte_identical(tmp_path, fixtures_dir, config, profile_paths):
    _run(tmp_path, fixtures_dir, config, profile_paths, ["pc", "ia", "roofline"], name="a")
    _run(tmp_path, fixtures_dir, config, profile_paths, ["pc", "ia", "roofline"], name="b")
    for artifact in ("prompt.txt", "prompt.json", "result.json", "beliefs.json",
                     "completion.json", "importance.json", "insights.json"):
        a = (tmp_path / "a" / artifact).read_bytes()
        b = (tmp_path / "b" / artifact).read_bytes()
        assert a == b, artifact


def test_stage_failure_wrapped_and_recorded(tmp_path, fixtures_dir, config):
    bad = tmp_path / "bad.csv"
    bad.write_text("not,a,roofline\n")
    with pytest.raises(StageError) as excinfo:
        run_pipeline(
            fixtures_dir / "accuracy.cu",
            ["roofline"],
            {"roofline": bad},
            "NVIDIA H100",
            "cfg",
            config,
            tmp_path / "fail",
        )
    assert excinfo.value.stage == "ingest"
    assert excinfo.value.exit_code == 2
    state = json.loads((tmp_path / "fail" / "job.json").read_text())
    assert state["state"] == "failed"
    assert state["error"]["stage"] == "ingest"


def test_missing_logprobs_degrades_to_no_beliefs(tmp_path, fixtures_dir, profile_paths):
    fixtures = tmp_path / "degraded-fixtures"
    fixtures.mkdir()
    (fixtures / "default.json").write_text(json.dumps(NO_LOGPROB_REPLY))
    config = RunConfig(backend=BackendConfig(mode="mock", fixtures_dir=str(fixtures)))
    with pytest.warns(UserWarning, match="belief"):
        job = _run(tmp_path, fixtures_dir, config, profile_paths, ["pc"], name="degraded")
    assert job.state == "done"
    assert "beliefs" not in job.outputs
    assert "completion" in job.outputs
    assert "result" in job.outputs


def test_rule_free_roofline_section_omitted(tmp_path, fixtures_dir, config):
    # NVIDIA export with metrics only renders an empty summary, so the
    # prompt must omit the section rather than emit a blank body
    metrics_only = tmp_path / "metrics_only.csv"
    metrics_only.write_text(
        "Metric Name,Metric Value,Metric Unit,Rule Name,Rule Description,Estimated Speedup\n"
        "dram__bytes.sum,1.5e9,byte,,,\n"
    )
    with pytest.warns(UserWarning, match="empty summary"):
        job = run_pipeline(
            fixtures_dir / "accuracy.cu",
            ["roofline"],
            {"roofline": metrics_only},
            "NVIDIA H100",
            "cfg",
            config,
            tmp_path / "norules",
        )
    assert job.state == "done"
    prompt = (tmp_path / "norules" / "prompt.txt").read_text()
    assert "roofline_summary" not in prompt


def test_amd_roofline_dispatched_by_extension(tmp_path, fixtures_dir, config):
    job = run_pipeline(
        fixtures_dir / "accuracy.cu",
        ["roofline"],
        {"roofline": fixtures_dir / "amd_roofline.json"},
        "AMD MI210",
        "cfg",
        config,
        tmp_path / "amd",
    )
    assert job.state == "done"
    prompt = (tmp_path / "amd" / "prompt.txt").read_text()
    assert "lowest-utilization components listed first" in prompt
    assert "LDS: observed 2400 of peak 12800 (18.8% utilized)" in prompt


# ---------------------------------------------------------------------------
# job store
# ---------------------------------------------------------------------------

def test_store_save_load_roundtrip(tmp_path):
    store = JobStore(tmp_path / "jobs")
    job = Job(id="abc-1", inputs={"code": "k.cu"})
    store.save(job)
    assert store.load("abc-1").to_dict() == job.to_dict()
    with pytest.raises(KeyError):
        store.load("nope")


def test_interrupted_job_recovered_as_failed(tmp_path):
    store = JobStore(tmp_path / "jobs")
    store.save(Job(id="j-run", state="running"))
    store.save(Job(id="j-done", state="done"))
    recovered = store.recover()
    assert recovered == ["j-run"]
    assert store.load("j-run").state == "failed"
    assert store.load("j-run").error["stage"] == "interrupted"
    assert store.load("j-done").state == "done"


def test_decision_log_appends(tmp_path):
    store = JobStore(tmp_path / "jobs")
    store.save(Job(id="j", state="done"))
    store.append_decision("j", {"record_index": 0, "action": "override", "note": "swap"})
    store.append_decision("j", {"record_index": 1, "action": "accept", "note": ""})
    decisions = store.decisions("j")
    assert len(decisions) == 2
    assert decisions[0]["action"] == "override"


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def test_config_overrides_nested():
    config = RunConfig().with_overrides(
        {
            "backend": {"mode": "mock", "fixtures_dir": "/fx"},
            "omp": {"seed": 9, "kappa": 4},
            "pipeline": {"top_k": 3, "alpha": 1.0},
            "server": {"workers": 2},
        }
    )
    assert config.backend.fixtures_dir == "/fx"
    assert config.omp.seed == 9
    assert config.omp.kappa == 4
    assert config.omp.tau == 3  # untouched default
    assert config.top_k == 3
    assert config.alpha == 1.0
    assert config.workers == 2


def test_config_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        RunConfig().with_overrides({"bogus": {}})
    with pytest.raises(ConfigError):
        RunConfig().with_overrides({"pipeline": {"bogus": 1}})


def test_config_from_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text('{"backend": {"mode": "mock", "fixtures_dir": "/fx"}, "omp": {"seed": 3}}')
    config = RunConfig.from_file(path)
    assert config.backend.mode == "mock"
    assert config.omp.seed == 3
