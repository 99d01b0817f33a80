"""JSON HTTP API over the job store, backing the dashboard and scripts.

Endpoints:
    POST /api/jobs                  multipart upload -> {"id": ...}
    GET  /api/jobs                  job listing
    GET  /api/jobs/{id}             job state (+ decision log)
    GET  /api/jobs/{id}/result      parsed GenerationResult JSON
    GET  /api/jobs/{id}/beliefs     BeliefReport JSON (chart feed)
    POST /api/jobs/{id}/decision    accept/override/reject a record

404 for unknown jobs, 409 for result/decision access on unfinished jobs,
422 for invalid uploads.  Jobs execute on a worker pool (1 worker by
default, so jobs run sequentially per process); handlers stay concurrent.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Form, HTTPException, UploadFile
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import ConfigError, SourceMissingError, StageError
from .jsonutil import read_json
from .pipeline import (
    DECISION_ACTIONS,
    JOB_DONE,
    JobStore,
    RunConfig,
    make_job_id,
    run_pipeline,
    validate_selection,
)

logger = logging.getLogger(__name__)


class DecisionBody(BaseModel):
    record_index: int
    action: str
    note: str = ""


def create_app(store: JobStore, config: RunConfig, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="opal", docs_url=None, redoc_url=None)
    executor = ThreadPoolExecutor(max_workers=max(1, config.workers))
    app.state.store = store
    app.state.executor = executor

    interrupted = store.recover()
    if interrupted:
        logger.warning("marked %d interrupted job(s) as failed", len(interrupted))

    def load_or_404(job_id: str):
        try:
            return store.load(job_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")

    @app.post("/api/jobs")
    async def submit_job(
        code: UploadFile,
        sources: str = Form(""),
        arch: str = Form(...),
        input_config: str = Form(...),
        seed: int | None = Form(None),
        config_overrides: str | None = Form(None),
        pc: UploadFile | None = None,
        roofline: UploadFile | None = None,
        counters: UploadFile | None = None,
        counter_dict: UploadFile | None = None,
    ):
        run_config = config
        if config_overrides:
            try:
                run_config = config.with_overrides(json.loads(config_overrides))
            except (ValueError, ConfigError) as exc:
                raise HTTPException(status_code=422, detail=f"bad config overrides: {exc}")
        if seed is not None:
            run_config = run_config.with_overrides({"omp": {"seed": seed}})
        if not arch.strip() or not input_config.strip():
            raise HTTPException(status_code=422, detail="arch and input_config must be non-empty")

        selected = [s for s in (t.strip() for t in sources.split(",")) if s]
        uploads = {"pc": pc, "roofline": roofline, "counters": counters,
                   "counter_dict": counter_dict}
        blobs: dict[str, bytes] = {}
        for key, upload in uploads.items():
            if upload is not None:
                blobs[key] = await upload.read()
        code_bytes = await code.read()
        if not code_bytes:
            raise HTTPException(status_code=422, detail="code upload is empty")

        try:
            validate_selection(selected, dict.fromkeys(blobs, "<uploaded>"), check_files=False)
        except (ConfigError, SourceMissingError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))

        job_id = make_job_id(
            code_bytes,
            selected,
            [blobs[k] for k in sorted(blobs)],
            arch,
            input_config,
            run_config.omp.seed,
        )
        job_dir = store.job_dir(job_id)
        inputs_dir = job_dir / "inputs"
        inputs_dir.mkdir(parents=True, exist_ok=True)
        code_path = inputs_dir / (Path(code.filename or "kernel.cu").name)
        code_path.write_bytes(code_bytes)
        profile_paths: dict[str, Path] = {}
        default_names = {
            "pc": "pc.json",
            "roofline": "roofline.csv",
            "counters": "counters.csv",
            "counter_dict": "counter_dict.json",
        }
        for key, blob in blobs.items():
            upload = uploads[key]
            name = Path(upload.filename or default_names[key]).name
            target = inputs_dir / name
            target.write_bytes(blob)
            profile_paths[key] = target

        from .pipeline import Job

        job = Job(
            id=job_id,
            inputs={
                "code": code_path.name,
                "sources": selected,
                "profiles": {k: v.name for k, v in profile_paths.items()},
                "arch": arch,
                "input_config": input_config,
                "seed": run_config.omp.seed,
                "backend_mode": run_config.backend.mode,
            },
            created_at=datetime.now(timezone.utc).isoformat(),
        )
        store.save(job)

        def work():
            try:
                run_pipeline(
                    code_path,
                    selected,
                    profile_paths,
                    arch,
                    input_config,
                    run_config,
                    job_dir,
                    store=store,
                    job=job,
                )
            except StageError as exc:
                logger.warning("job %s failed: %s", job_id, exc)
            except Exception:
                logger.exception("job %s crashed outside a stage", job_id)

        executor.submit(work)
        return {"id": job_id}

    @app.get("/api/jobs")
    def list_jobs():
        return {"jobs": [j.to_dict() for j in store.list_jobs()]}

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        job = load_or_404(job_id)
        payload = job.to_dict()
        payload["decisions"] = store.decisions(job_id)
        # the dashboard needs the numbered source for the diff pane and the
        # insight summaries for provenance linking; embed both when present
        for key in ("kernel", "insights"):
            name = job.outputs.get(key)
            if name and (store.job_dir(job_id) / name).is_file():
                payload[key] = read_json(store.job_dir(job_id) / name)
        return payload

    def artifact_or_error(job_id: str, key: str, missing_detail: str):
        job = load_or_404(job_id)
        if job.state != JOB_DONE:
            raise HTTPException(
                status_code=409, detail=f"job {job_id!r} is {job.state}, not done"
            )
        name = job.outputs.get(key)
        if name is None:
            raise HTTPException(status_code=404, detail=missing_detail)
        return JSONResponse(read_json(store.job_dir(job_id) / name))

    @app.get("/api/jobs/{job_id}/result")
    def get_result(job_id: str):
        return artifact_or_error(job_id, "result", "job has no result artifact")

    @app.get("/api/jobs/{job_id}/beliefs")
    def get_beliefs(job_id: str):
        return artifact_or_error(
            job_id, "beliefs", "no belief report (backend omitted logprobs)"
        )

    @app.post("/api/jobs/{job_id}/decision")
    def post_decision(job_id: str, body: DecisionBody):
        job = load_or_404(job_id)
        if job.state != JOB_DONE:
            raise HTTPException(
                status_code=409, detail=f"cannot record a decision on a {job.state} job"
            )
        if body.action not in DECISION_ACTIONS:
            raise HTTPException(
                status_code=422,
                detail=f"action must be one of {', '.join(DECISION_ACTIONS)}",
            )
        if body.record_index < 0:
            raise HTTPException(status_code=422, detail="record_index must be >= 0")
        decision = {
            "record_index": body.record_index,
            "action": body.action,
            "note": body.note,
            "recorded_at": datetime.now(timezone.utc).isoformat(),
        }
        store.append_decision(job_id, decision)
        return decision

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="dashboard")

    return app


def serve(
    config: RunConfig,
    jobs_dir: str | Path,
    port: int = 8000,
    host: str = "127.0.0.1",
    static_dir: str | Path | None = None,
) -> None:
    """Run the API (and dashboard, when static assets are supplied)."""
    import uvicorn

    store = JobStore(jobs_dir)
    app = create_app(store, config, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
