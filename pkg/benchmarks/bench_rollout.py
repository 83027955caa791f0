#!/usr/bin/env python3
"""Benchmark the rollout kernel: numba JIT versus pure-NumPy fallback.

Runs itself twice in subprocesses, once per HYPOGUARD_NUMBA setting, so
each measurement sees a cleanly configured process. Timings exclude the
one-off JIT compile (a warm-up rollout runs first).

    python3 benchmarks/bench_rollout.py [--rollouts N]
"""

import argparse
import json
import os
import subprocess
import sys
import time
from pathlib import Path

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "hypoguard" / "data"


def measure(n_rollouts):
    import numpy as np

    from hypoguard._accel import NUMBA_ENABLED
    from hypoguard.population import (build_scenario_model, fit_behavior_model,
                                      load_behavior_csv, load_patient_json,
                                      sample_scenario)
    from hypoguard.simulator import load_sim_config, rollout, simulate_batch

    profile = load_patient_json(DATA_DIR / "patient_adult.json")
    sim, ctrl = load_sim_config(DATA_DIR / "sim_adult.json")
    behavior = fit_behavior_model(load_behavior_csv(DATA_DIR / "behavior.csv"))
    model = build_scenario_model(profile, behavior)
    samples = sample_scenario(model, np.random.default_rng(0), n_rollouts)

    rollout(samples[0], ctrl, sim)  # warm-up: JIT compile / cache load
    t0 = time.perf_counter()
    risks = simulate_batch(samples, ctrl, sim, threads=1)
    elapsed = time.perf_counter() - t0
    return {
        "numba": NUMBA_ENABLED,
        "rollouts": n_rollouts,
        "seconds": elapsed,
        "per_second": n_rollouts / elapsed,
        "checksum": float(risks.sum()),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rollouts", type=int, default=2000)
    parser.add_argument("--_measure", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args._measure:
        print(json.dumps(measure(args.rollouts)))
        return

    results = {}
    for flag in ("1", "0"):
        env = dict(os.environ, HYPOGUARD_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, __file__, "--_measure", "--rollouts",
             str(args.rollouts)],
            capture_output=True, text=True, env=env, check=True)
        results[flag] = json.loads(out.stdout.strip().splitlines()[-1])

    jit, fb = results["1"], results["0"]
    print(f"{'path':<18}{'rollouts':>10}{'seconds':>10}{'rollouts/s':>14}")
    print(f"{'numba JIT':<18}{jit['rollouts']:>10}{jit['seconds']:>10.3f}"
          f"{jit['per_second']:>14.0f}")
    print(f"{'numpy fallback':<18}{fb['rollouts']:>10}{fb['seconds']:>10.3f}"
          f"{fb['per_second']:>14.0f}")
    print(f"speedup: {fb['seconds'] / jit['seconds']:.1f}x")
    same = jit["checksum"] == fb["checksum"]
    print(f"identical results: {same}")
    if not same:
        sys.exit(1)


if __name__ == "__main__":
    main()
