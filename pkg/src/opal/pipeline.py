"""End-to-end orchestration: ingest, rank, summarize, prompt, generate,
parse, trace.

Every job owns a directory of plain JSON/text artifacts (no database), so
the full diagnostic-to-edit chain stays auditable: inputs manifest, parsed
records, importance ranking, insight summaries, the exact prompt, the raw
completion, the parsed result, and the belief report.  State files are
written atomically; a job interrupted mid-stage is recovered as failed,
never as done.

Artifacts contain no timestamps or ids, so re-running a job with identical
inputs, a mock backend, and a fixed seed reproduces them byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import time
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import ConfigError, MissingLogprobsError, SourceMissingError, StageError
from .gateway import BackendConfig, GenerationRequest, generate, make_backend
from .importance import OmpConfig, rank_counters, summarize_counters
from .ingest import (
    CounterDictionary,
    parse_counter_dictionary,
    parse_counter_matrix,
    parse_kernel_source,
    parse_pc_sampling,
    parse_roofline_amd,
    parse_roofline_nvidia,
)
from .insights import InsightSet, summarize_importance, summarize_roofline, summarize_stalls
from .jsonutil import read_json, write_json, write_json_atomic
from .prompt import PromptMetadata, build_prompt
from .response import parse_response

VALID_SOURCES = ("pc", "ia", "roofline")

JOB_PENDING = "pending"
JOB_RUNNING = "running"
JOB_DONE = "done"
JOB_FAILED = "failed"

DECISION_ACTIONS = ("accept", "override", "reject")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    backend: BackendConfig = field(default_factory=BackendConfig)
    omp: OmpConfig = field(default_factory=OmpConfig)
    stall_threshold: float = 0.10
    per_stall_type: bool = False
    max_summary_lines: int = 80
    top_k: int = 5
    alpha: float = 2.0
    histogram_bins: int = 20
    max_prompt_tokens: int = 24_000
    workers: int = 1

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        config = cls()
        return config.with_overrides(data)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(read_json(path))

    def with_overrides(self, data: dict) -> "RunConfig":
        backend = self.backend
        omp = self.omp
        plain = {
            k: v for k, v in vars(self).items() if k not in ("backend", "omp")
        }
        for key, value in data.items():
            if key == "backend":
                merged = {**_public_vars(backend), **value}
                backend = BackendConfig.from_dict(merged)
            elif key == "omp":
                merged = {**_public_vars(omp), **value}
                omp = OmpConfig(**merged)
            elif key == "pipeline":
                for pk, pv in value.items():
                    if pk not in plain:
                        raise ConfigError(f"unknown pipeline config key {pk!r}")
                    plain[pk] = pv
            elif key == "server":
                if "workers" in value:
                    plain["workers"] = value["workers"]
            else:
                raise ConfigError(f"unknown config section {key!r}")
        return RunConfig(backend=backend, omp=omp, **plain)


def _public_vars(obj) -> dict:
    return {k: v for k, v in vars(obj).items() if not k.startswith("_")}


# ---------------------------------------------------------------------------
# Job record and store
# ---------------------------------------------------------------------------

@dataclass
class Job:
    id: str
    state: str = JOB_PENDING
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    error: dict | None = None
    timings: dict = field(default_factory=dict)
    created_at: str = ""

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "state": self.state,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "error": self.error,
            "timings": self.timings,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Job":
        return cls(**data)


def make_job_id(code_bytes: bytes, sources: list[str], profile_blobs: list[bytes],
                arch: str, input_config: str, seed: int) -> str:
    digest = hashlib.sha256()
    digest.update(code_bytes)
    digest.update(",".join(sorted(sources)).encode())
    for blob in profile_blobs:
        digest.update(blob)
    digest.update(f"{arch}|{input_config}|{seed}".encode())
    stamp = datetime.now(timezone.utc).strftime("%Y%m%d%H%M%S%f")
    return f"{digest.hexdigest()[:12]}-{stamp}"


class JobStore:
    """Directory tree of job artifacts: ``<root>/<job-id>/job.json`` etc."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def job_dir(self, job_id: str) -> Path:
        return self.root / job_id

    def save(self, job: Job) -> None:
        path = self.job_dir(job.id)
        path.mkdir(parents=True, exist_ok=True)
        write_json_atomic(path / "job.json", job.to_dict())

    def load(self, job_id: str) -> Job:
        path = self.job_dir(job_id) / "job.json"
        if not path.is_file():
            raise KeyError(job_id)
        return Job.from_dict(read_json(path))

    def list_jobs(self) -> list[Job]:
        jobs = []
        for state_file in sorted(self.root.glob("*/job.json")):
            jobs.append(Job.from_dict(read_json(state_file)))
        return jobs

    def recover(self) -> list[str]:
        """Mark jobs left running by a crashed process as failed."""
        interrupted = []
        for job in self.list_jobs():
            if job.state in (JOB_RUNNING, JOB_PENDING):
                job.state = JOB_FAILED
                job.error = {
                    "stage": "interrupted",
                    "type": "Interrupted",
                    "message": "job was interrupted by a service restart",
                }
                self.save(job)
                interrupted.append(job.id)
        return interrupted

    def append_decision(self, job_id: str, decision: dict) -> None:
        path = self.job_dir(job_id) / "decisions.jsonl"
        with path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(decision, sort_keys=True) + "\n")

    def decisions(self, job_id: str) -> list[dict]:
        path = self.job_dir(job_id) / "decisions.jsonl"
        if not path.is_file():
            return []
        return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line]


# ---------------------------------------------------------------------------
# Pipeline execution
# ---------------------------------------------------------------------------

def validate_selection(sources, profile_paths, check_files: bool = True) -> list[str]:
    """Check the source selection against supplied profile files, before any work.

    ``check_files=False`` validates only that each selected source has an
    entry (the service validates in-memory uploads before they hit disk).
    """
    selected = list(dict.fromkeys(sources))
    for name in selected:
        if name not in VALID_SOURCES:
            raise ConfigError(f"unknown source {name!r}; valid sources: {', '.join(VALID_SOURCES)}")
    required = {"pc": ["pc"], "roofline": ["roofline"], "ia": ["counters", "counter_dict"]}
    for name in selected:
        for key in required[name]:
            path = profile_paths.get(key)
            if path is None:
                raise SourceMissingError(f"source {name!r} selected but no {key} file supplied")
            if check_files and not Path(path).is_file():
                raise SourceMissingError(f"source {name!r} selected but {path} does not exist")
    return selected


def run_pipeline(
    code_path: str | Path,
    sources,
    profile_paths: dict,
    arch: str,
    input_config: str,
    config: RunConfig,
    job_dir: str | Path,
    job_id: str | None = None,
    store: JobStore | None = None,
    job: Job | None = None,
) -> Job:
    """Execute every stage for one kernel, persisting artifacts under job_dir.

    Raises StageError (wrapping the causal error and naming the stage) after
    recording the failure in the job state file.
    """
    code_path = Path(code_path)
    selected = validate_selection(sources, profile_paths)
    if not code_path.is_file():
        raise SourceMissingError(f"code file {code_path} does not exist")

    job_dir = Path(job_dir)
    job_dir.mkdir(parents=True, exist_ok=True)

    if job is None:
        if job_id is None:
            blobs = [Path(profile_paths[k]).read_bytes() for k in sorted(profile_paths)
                     if profile_paths[k] and Path(profile_paths[k]).is_file()]
            job_id = make_job_id(
                code_path.read_bytes(), selected, blobs, arch, input_config, config.omp.seed
            )
        job = Job(
            id=job_id,
            inputs={
                "code": code_path.name,
                "sources": selected,
                "profiles": {k: Path(v).name for k, v in profile_paths.items() if v},
                "arch": arch,
                "input_config": input_config,
                "seed": config.omp.seed,
                "backend_mode": config.backend.mode,
            },
            created_at=datetime.now(timezone.utc).isoformat(),
        )

    def save() -> None:
        if store is not None:
            store.save(job)
        else:
            write_json_atomic(job_dir / "job.json", job.to_dict())

    def stage(name: str, fn):
        started = time.perf_counter()
        try:
            result = fn()
        except Exception as exc:
            job.timings[name] = round(time.perf_counter() - started, 6)
            job.state = JOB_FAILED
            job.error = {"stage": name, "type": type(exc).__name__, "message": str(exc)}
            save()
            raise StageError(name, exc) from exc
        job.timings[name] = round(time.perf_counter() - started, 6)
        return result

    job.state = JOB_RUNNING
    save()

    # -- ingest -----------------------------------------------------------
    def do_ingest():
        records = {}
        records["source"] = parse_kernel_source(code_path)
        write_json(job_dir / "kernel.json", records["source"].to_dict())
        job.outputs["kernel"] = "kernel.json"
        if "pc" in selected:
            records["stalls"] = parse_pc_sampling(profile_paths["pc"], records["source"])
            write_json(job_dir / "stalls.json", records["stalls"].to_dict())
            job.outputs["stalls"] = "stalls.json"
        if "roofline" in selected:
            roofline_path = Path(profile_paths["roofline"])
            if roofline_path.suffix.lower() == ".json":
                records["roofline"] = parse_roofline_amd(roofline_path)
            else:
                records["roofline"] = parse_roofline_nvidia(roofline_path)
            write_json(job_dir / "roofline.json", records["roofline"].to_dict())
            job.outputs["roofline"] = "roofline.json"
        if "ia" in selected:
            records["counters"] = parse_counter_matrix(profile_paths["counters"])
            records["counter_dict"] = parse_counter_dictionary(profile_paths["counter_dict"])
            write_json(job_dir / "counters.json", records["counters"].to_dict())
            job.outputs["counters"] = "counters.json"
        return records

    records = stage("ingest", do_ingest)

    # -- importance -------------------------------------------------------
    importance_summary = None
    if "ia" in selected:
        def do_importance():
            result = rank_counters(records["counters"], config.omp, top_k=config.top_k)
            write_json(job_dir / "importance.json", result.to_dict())
            job.outputs["importance"] = "importance.json"
            dictionary: CounterDictionary = records["counter_dict"]
            return summarize_counters(result, dictionary, k=config.top_k)

        importance_summary = stage("importance", do_importance)

    # -- insights ---------------------------------------------------------
    def do_insights():
        insight_set = InsightSet()
        if "roofline" in selected:
            text = summarize_roofline(records["roofline"], config.max_summary_lines)
            if text:
                insight_set.roofline_summary = text
                insight_set.provenance["roofline"] = [Path(profile_paths["roofline"]).name]
            else:
                warnings.warn("roofline record produced an empty summary; section omitted")
        if "pc" in selected:
            text, _findings = summarize_stalls(
                records["stalls"],
                records["source"],
                threshold=config.stall_threshold,
                max_lines=config.max_summary_lines,
                per_stall_type=config.per_stall_type,
            )
            if text:
                insight_set.stall_summary = text
                insight_set.provenance["stall"] = [Path(profile_paths["pc"]).name]
            else:
                warnings.warn("no stall exceeded the threshold; section omitted")
        if "ia" in selected:
            if importance_summary:
                insight_set.counter_summary = summarize_importance(
                    importance_summary, config.max_summary_lines
                )
                insight_set.provenance["counters"] = [
                    Path(profile_paths["counters"]).name,
                    Path(profile_paths["counter_dict"]).name,
                ]
            else:
                warnings.warn("no counter was ever selected; section omitted")
        write_json(job_dir / "insights.json", insight_set.to_dict())
        job.outputs["insights"] = "insights.json"
        return insight_set

    insight_set = stage("insights", do_insights)

    # -- prompt -----------------------------------------------------------
    def do_prompt():
        metadata = PromptMetadata(
            language=records["source"].language.value,
            architecture=arch,
            input_config=input_config,
        )
        document = build_prompt(
            records["source"], insight_set, metadata, max_tokens=config.max_prompt_tokens
        )
        (job_dir / "prompt.txt").write_text(document.text, encoding="utf-8")
        write_json(job_dir / "prompt.json", document.to_dict())
        job.outputs["prompt"] = "prompt.json"
        job.outputs["prompt_text"] = "prompt.txt"
        return document

    document = stage("prompt", do_prompt)

    # -- generate ---------------------------------------------------------
    def do_generate():
        backend = make_backend(config.backend)
        request = GenerationRequest(
            prompt=document,
            model=config.backend.model,
            temperature=config.backend.temperature,
            logprobs=True,
            max_output_tokens=config.backend.max_output_tokens,
        )
        try:
            completion = generate(request, backend)
            degraded = False
        except MissingLogprobsError as exc:
            warnings.warn(f"{exc}; continuing without a belief report")
            completion = exc.completion
            degraded = True
        write_json(job_dir / "completion.json", completion.to_dict())
        job.outputs["completion"] = "completion.json"
        return completion, degraded

    completion, belief_skipped = stage("generate", do_generate)

    # -- parse ------------------------------------------------------------
    def do_parse():
        result = parse_response(completion)
        write_json(job_dir / "result.json", result.to_dict(completion_ref="completion.json"))
        job.outputs["result"] = "result.json"
        optimized_name = f"{code_path.stem}.optimized{code_path.suffix}"
        (job_dir / optimized_name).write_text(result.optimized_code, encoding="utf-8")
        job.outputs["optimized_code"] = optimized_name
        return result

    stage("parse", do_parse)

    # -- belief trace -----------------------------------------------------
    if not belief_skipped:
        def do_beliefs():
            from .belief import trace_beliefs

            report = trace_beliefs(
                completion,
                document.reference_dictionary,
                alpha=config.alpha,
                bins=config.histogram_bins,
            )
            write_json(job_dir / "beliefs.json", report.to_dict())
            job.outputs["beliefs"] = "beliefs.json"
            return report

        stage("beliefs", do_beliefs)

    job.state = JOB_DONE
    save()
    return job
