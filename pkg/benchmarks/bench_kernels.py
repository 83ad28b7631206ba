"""Time the simulation kernel on the numba and pure-Python backends.

    python benchmarks/bench_kernels.py [--runs N] [--steps N] [--presets ...]

Each backend runs in its own interpreter (the backend is fixed at import
time). Also checks that both produce the same outcomes.
"""

import argparse
import json
import os
import subprocess
import sys
import time

CHILD = r"""
import json, sys, time
import lamm
from lamm.harness import get_preset, run_experiment, run_single
presets, runs, steps = sys.argv[1].split(","), int(sys.argv[2]), int(sys.argv[3])
out = {"backend": lamm.BACKEND, "results": {}}
for name in presets:
    cfg = get_preset(name).with_(runs=runs, steps=steps)
    run_single(cfg.with_(steps=10), 0)  # compile outside the timing
    t = time.perf_counter()
    summary, traces = run_experiment(cfg, keep_traces=False)
    out["results"][name] = {
        "seconds": time.perf_counter() - t,
        "outcomes": [[o.converged_step, o.converged_action, o.final_expected_reward]
                     for o in (tr.outcome for tr in traces)],
    }
print(json.dumps(out))
"""


def run_backend(disable, presets, runs, steps):
    env = dict(os.environ, LAMM_DISABLE_NUMBA="1" if disable else "0")
    proc = subprocess.run([sys.executable, "-c", CHILD, ",".join(presets), str(runs), str(steps)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--runs", type=int, default=5)
    parser.add_argument("--steps", type=int, default=5000)
    parser.add_argument("--presets", nargs="+",
                        default=["B10-LRI", "B10-LRP", "B10-Pursuit", "B10-MultiFixed", "B10-MultiAdaptive"])
    args = parser.parse_args()

    t = time.perf_counter()
    fast = run_backend(False, args.presets, args.runs, args.steps)
    slow = run_backend(True, args.presets, args.runs, args.steps)
    steps_total = args.runs * args.steps
    print(f"{'preset':<20}{'numba s':>10}{'python s':>10}{'speedup':>10}  same")
    for name in args.presets:
        a, b = fast["results"][name], slow["results"][name]
        same = a["outcomes"] == b["outcomes"]
        print(f"{name:<20}{a['seconds']:>10.4f}{b['seconds']:>10.3f}"
              f"{b['seconds'] / max(a['seconds'], 1e-9):>10.0f}  {same}")
    print(f"({args.runs} runs x {args.steps} steps = {steps_total} steps per preset; "
          f"backends {fast['backend']}/{slow['backend']}; total {time.perf_counter() - t:.1f}s)")


if __name__ == "__main__":
    main()
