#!/usr/bin/env python3
"""Compare the numba-compiled pursuit kernel against the numpy fallback.

Runs the same ensemble workload twice, once per backend (selected through
the ``OPAL_NUMBA`` env flag in a subprocess), checks that both produce the
identical ranking, and prints a timing table.

    python3 benchmarks/bench_omp.py
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

CASES = [
    # (runs, counters, kappa, tau, ensemble)
    (40, 30, 3, 3, 32),
    (200, 400, 5, 3, 32),
    (400, 1000, 5, 3, 64),
]


def run_case(runs: int, counters: int, kappa: int, tau: int, ensemble: int) -> dict:
    import numpy as np

    from opal import _omp_kernels
    from opal.importance import OmpConfig, ensemble_omp

    rng = np.random.default_rng(0)
    values = rng.normal(size=(runs, counters))
    support = rng.choice(counters, size=kappa, replace=False)
    target = values[:, support] @ rng.uniform(1.0, 3.0, size=kappa)
    target += 1e-3 * rng.normal(size=runs)

    config = OmpConfig(kappa=kappa, tau=tau, ensemble_size=ensemble, seed=7)
    ensemble_omp(values, target, config)  # warm (jit compile / cache load)

    started = time.perf_counter()
    result = ensemble_omp(values, target, config)
    elapsed = time.perf_counter() - started
    return {
        "backend": _omp_kernels.BACKEND,
        "elapsed": elapsed,
        "ranking": [r.counter_name for r in result.ranked[:10]],
        "scores": [r.score for r in result.ranked[:10]],
    }


def worker(case_index: int) -> None:
    print(json.dumps(run_case(*CASES[case_index])))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--worker", type=int, default=None, help=argparse.SUPPRESS)
    args = parser.parse_args()
    if args.worker is not None:
        worker(args.worker)
        return

    print(f"{'case (N x C, kappa, tau, E)':<34} {'numba':>10} {'numpy':>10} {'speedup':>9}")
    for index, case in enumerate(CASES):
        timings = {}
        rankings = {}
        for flag, label in (("1", "numba"), ("0", "numpy")):
            env = dict(os.environ, OPAL_NUMBA=flag)
            proc = subprocess.run(
                [sys.executable, __file__, "--worker", str(index)],
                capture_output=True, text=True, env=env, check=True,
            )
            payload = json.loads(proc.stdout)
            assert payload["backend"] == label, payload["backend"]
            timings[label] = payload["elapsed"]
            rankings[label] = (payload["ranking"], payload["scores"])
        if rankings["numba"] != rankings["numpy"]:
            raise SystemExit(f"case {case}: backends disagree on the ranking")
        runs, counters, kappa, tau, ensemble = case
        label = f"{runs}x{counters}, k={kappa}, tau={tau}, E={ensemble}"
        speedup = timings["numpy"] / timings["numba"]
        print(
            f"{label:<34} {timings['numba'] * 1e3:>8.1f}ms {timings['numpy'] * 1e3:>8.1f}ms "
            f"{speedup:>8.1f}x"
        )
    print("rankings identical across backends for every case")


if __name__ == "__main__":
    main()
