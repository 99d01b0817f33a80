"""Command-line interface.

    opal optimize --code k.cu --sources pc,ia,roofline --pc pc.json \
        --counters counters.csv --counter-dict dict.json --roofline roof.csv \
        --arch "NVIDIA H100" --input-config "(8192,5000,10,100)" --out jobdir
    opal serve --port 8000 --jobs-dir jobs/
    opal beliefs <job-id> --top 20 --jobs-dir jobs/

Exit codes: 0 ok, 2 input error, 3 backend error, 4 response-parse error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import OpalError, StageError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opal",
        description="Turn GPU profiler diagnostics into LLM-guided kernel optimizations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    opt = sub.add_parser("optimize", help="run the full pipeline for one kernel")
    opt.add_argument("--code", required=True, help="kernel source file (CUDA or HIP)")
    opt.add_argument(
        "--sources",
        default="",
        help="comma-separated diagnostic sources to use: pc,ia,roofline (may be empty)",
    )
    opt.add_argument("--pc", help="canonical PC-sampling JSON")
    opt.add_argument("--counters", help="canonical counter CSV (config,<counters...>,target)")
    opt.add_argument("--counter-dict", help="counter description dictionary JSON")
    opt.add_argument("--roofline", help="canonical roofline file (.csv NVIDIA, .json AMD)")
    opt.add_argument("--arch", required=True, help="target architecture, e.g. 'NVIDIA H100'")
    opt.add_argument("--input-config", required=True, help="input configuration label")
    opt.add_argument("--out", required=True, help="job directory for artifacts")
    opt.add_argument("--backend", choices=["live", "mock"], help="override backend mode")
    opt.add_argument("--seed", type=int, help="ensemble seed override")
    opt.add_argument("--config", help="JSON config file")
    opt.add_argument("--fixtures", help="mock fixture directory (overrides config)")
    opt.add_argument("--model", help="backend model name override")

    srv = sub.add_parser("serve", help="run the JSON API / dashboard service")
    srv.add_argument("--port", type=int, default=8000)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--jobs-dir", required=True, help="root directory for job artifacts")
    srv.add_argument("--config", help="JSON config file")
    srv.add_argument("--fixtures", help="mock fixture directory (overrides config)")
    srv.add_argument("--static", help="directory of built dashboard assets to serve at /")

    bel = sub.add_parser("beliefs", help="print the top keyword beliefs for a finished job")
    bel.add_argument("job_id", help="job id (or path to a job directory)")
    bel.add_argument("--top", type=int, default=20, help="number of keywords to show")
    bel.add_argument("--jobs-dir", default="jobs", help="root directory for job artifacts")

    return parser


def _load_config(args) -> "RunConfig":
    from .pipeline import RunConfig

    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides: dict = {}
    backend: dict = {}
    if getattr(args, "backend", None):
        backend["mode"] = args.backend
    if getattr(args, "fixtures", None):
        backend["fixtures_dir"] = args.fixtures
    if getattr(args, "model", None):
        backend["model"] = args.model
    if backend:
        overrides["backend"] = backend
    if getattr(args, "seed", None) is not None:
        overrides["omp"] = {"seed": args.seed}
    return config.with_overrides(overrides) if overrides else config


def cmd_optimize(args) -> int:
    from .pipeline import run_pipeline

    config = _load_config(args)
    profile_paths = {
        key: value
        for key, value in (
            ("pc", args.pc),
            ("roofline", args.roofline),
            ("counters", args.counters),
            ("counter_dict", args.counter_dict),
        )
        if value
    }
    sources = [s for s in (t.strip() for t in args.sources.split(",")) if s]
    job = run_pipeline(
        args.code,
        sources,
        profile_paths,
        args.arch,
        args.input_config,
        config,
        args.out,
    )
    print(f"job {job.id}: {job.state}")
    for name in ("prompt_text", "result", "beliefs", "optimized_code"):
        if name in job.outputs:
            print(f"  {name}: {Path(args.out) / job.outputs[name]}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    config = _load_config(args)
    serve(
        config,
        jobs_dir=args.jobs_dir,
        port=args.port,
        host=args.host,
        static_dir=args.static,
    )
    return 0


def cmd_beliefs(args) -> int:
    from .errors import InputError
    from .jsonutil import read_json

    candidate = Path(args.job_id)
    job_dir = candidate if candidate.is_dir() else Path(args.jobs_dir) / args.job_id
    beliefs_path = job_dir / "beliefs.json"
    if not beliefs_path.is_file():
        raise InputError(f"no belief report at {beliefs_path}")
    report = read_json(beliefs_path)
    keywords = report["keywords"][: max(args.top, 0)]
    width = max((len(k["phrase"]) for k in keywords), default=6)
    print(f"{'keyword'.ljust(width)}  score   belief    count")
    for k in keywords:
        print(
            f"{k['phrase'].ljust(width)}  {k['scaled_score']:.3f}  {k['raw_belief']:.6f}  "
            f"{k['count']}"
        )
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"optimize": cmd_optimize, "serve": cmd_serve, "beliefs": cmd_beliefs}
    try:
        return handlers[args.command](args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OpalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
