#!/usr/bin/env python3
"""Times forest training and prediction on both tree kernels.

The compiled extension and the pure-Python kernel must produce byte-identical
models and probabilities; speed is the only allowed difference. The kernel is
bound at import, so each backend runs in its own subprocess with
MATCOACH_FOREST_BACKEND forced.

Usage: python3 benchmarks/bench_forest.py [--patients N] [--per-patient N]
       [--trees N] [--repeats N] [--threads N] [--seed N]
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import subprocess
import sys
import tempfile
from time import perf_counter


def parse_args(argv):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--patients", type=int, default=50)
    parser.add_argument("--per-patient", type=int, default=40)
    parser.add_argument("--trees", type=int, default=100)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    parser.add_argument("--out", help=argparse.SUPPRESS)
    return parser.parse_args(argv)


def run_worker(args) -> None:
    from matcoach import rng
    from matcoach.dataset import encode
    from matcoach.forest import ForestParams, fit, to_json
    from matcoach.forest.backend import BACKEND
    from matcoach.simulator import CohortConfig, generate_dataset, uniform_random

    cohort = CohortConfig(args.patients, uniform_random(), args.per_patient, args.seed)
    matrix = encode(generate_dataset(cohort), include_patient_id=True)
    params = ForestParams(n_trees=args.trees, seed=rng.mix(args.seed, 1))

    forest = None
    fit_times = []
    for _ in range(args.repeats):
        start = perf_counter()
        forest = fit(matrix, params, threads=args.threads)
        fit_times.append(perf_counter() - start)

    proba = None
    predict_times = []
    for _ in range(args.repeats):
        start = perf_counter()
        proba = forest.predict_proba(matrix.X)
        predict_times.append(perf_counter() - start)

    with open(args.out, "w") as fh:
        fh.write(to_json(forest))
    report = {
        "backend": BACKEND,
        "rows": int(matrix.X.shape[0]),
        "features": int(matrix.X.shape[1]),
        "fit_seconds": fit_times,
        "predict_seconds": predict_times,
        "proba_sha256": hashlib.sha256(proba.tobytes()).hexdigest(),
    }
    print(json.dumps(report))


def run_backend(backend: str, args, out_path: str):
    cmd = [sys.executable, os.path.abspath(__file__), "--worker", "--out", out_path]
    for name in ("patients", "per_patient", "trees", "repeats", "threads", "seed"):
        cmd.extend([f"--{name.replace('_', '-')}", str(getattr(args, name))])
    env = dict(os.environ, MATCOACH_FOREST_BACKEND=backend)
    proc = subprocess.run(cmd, env=env, capture_output=True, text=True)
    if proc.returncode != 0:
        sys.stderr.write(proc.stderr)
        return None
    return json.loads(proc.stdout)


def main(argv=None) -> int:
    args = parse_args(sys.argv[1:] if argv is None else argv)
    if args.worker:
        run_worker(args)
        return 0

    with tempfile.TemporaryDirectory() as tmp:
        paths = {b: os.path.join(tmp, f"model_{b}.json") for b in ("cy", "py")}
        reports = {b: run_backend(b, args, paths[b]) for b in ("cy", "py")}
        if reports["py"] is None:
            print("pure-Python worker failed", file=sys.stderr)
            return 1
        if reports["cy"] is None:
            print("compiled extension unavailable; nothing to compare", file=sys.stderr)
            return 1
        models = {b: open(paths[b], "rb").read() for b in ("cy", "py")}

    rows = reports["py"]["rows"]
    features = reports["py"]["features"]
    print(
        f"dataset: {rows} rows x {features} features, "
        f"{args.trees} trees, threads={args.threads}, repeats={args.repeats}"
    )
    print(f"{'backend':<10}{'fit min':>10}{'fit mean':>10}{'predict min':>13}{'predict mean':>14}")
    for b in ("cy", "py"):
        rep = reports[b]
        fit_s, pred_s = rep["fit_seconds"], rep["predict_seconds"]
        print(
            f"{rep['backend']:<10}"
            f"{min(fit_s):>9.3f}s{sum(fit_s) / len(fit_s):>9.3f}s"
            f"{min(pred_s):>12.4f}s{sum(pred_s) / len(pred_s):>13.4f}s"
        )
    speedup = min(reports["py"]["fit_seconds"]) / min(reports["cy"]["fit_seconds"])
    print(f"fit speedup (compiled over python): {speedup:.1f}x")

    same_model = models["cy"] == models["py"]
    same_proba = reports["cy"]["proba_sha256"] == reports["py"]["proba_sha256"]
    print(f"model JSON byte-identical: {same_model}")
    print(f"probabilities identical: {same_proba}")
    return 0 if same_model and same_proba else 1


if __name__ == "__main__":
    sys.exit(main())
