"""Time the compiled kernels against the pure-Python reference on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 3] [--json out.json]

Each kernel runs on identical arrays under both backends; outputs are compared bit
for bit before timings are reported.
"""
import argparse
import json
import sys
import time

import numpy as np

from urlkit import _kernels_py
from urlkit._kernels_py import RATE_PER_VISIT
from urlkit.async_engine import make_schedule
from urlkit.mdp import random_mdp
from urlkit.rl import _uniforms, absorbing_states, uniform_behavior

try:
    from urlkit import _kernels
except ImportError:
    _kernels = None


def cases():
    M = random_mdp(30, 4, 0.95, seed=0, density=0.3)
    adm = M.admissible.astype(np.uint8)
    absb = absorbing_states(M).astype(np.uint8)
    sch = make_schedule(30, 5000, 0.5, 5, 1)
    steps = 100_000
    ua, un, ur = _uniforms(0, steps)
    beh = uniform_behavior(M)
    Phi = np.random.default_rng(2).random((30, 6))
    return {
        "async_bellman": ("async_bellman", (M.P, M.R, adm, M.gamma, np.zeros(30), sch.updates.astype(np.uint8),
                                            sch.delays, 0.0, False)),
        "q_learning": ("q_learning", (M.P, M.R, adm, M.gamma, beh, 0, steps, RATE_PER_VISIT, 1.0, 1.0, 1.0,
                                      ua, un, ur, absb, np.zeros((30, 4)))),
        "td0": ("td0", (M.P, M.R, beh, M.gamma, 0, steps, RATE_PER_VISIT, 1.0, 1.0, 1.0, ua, un, ur, absb,
                        np.zeros(30))),
        "td0_linear": ("td0_linear", (M.P, M.R, beh, M.gamma, Phi, 0, steps, RATE_PER_VISIT, 1.0, 1.0, 1.0,
                                      ua, un, ur, absb, np.zeros(6))),
    }


def best_of(fn, args, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def same(a, b):
    return all(np.asarray(x).tobytes() == np.asarray(y).tobytes() for x, y in zip(a, b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the Python backend is available", file=sys.stderr)
    rows = []
    for name, (fn, kargs) in cases().items():
        t_py, out_py = best_of(getattr(_kernels_py, fn), kargs, args.repeat)
        row = {"kernel": name, "python_s": t_py}
        if _kernels is not None:
            t_cy, out_cy = best_of(getattr(_kernels, fn), kargs, args.repeat)
            row.update(cython_s=t_cy, speedup=t_py / t_cy, identical=same(out_py, out_cy))
        rows.append(row)
    print(f"{'kernel':<15}{'python (s)':>12}{'cython (s)':>12}{'speedup':>10}  identical")
    for r in rows:
        if "cython_s" in r:
            print(f"{r['kernel']:<15}{r['python_s']:>12.4f}{r['cython_s']:>12.4f}{r['speedup']:>9.1f}x  {r['identical']}")
        else:
            print(f"{r['kernel']:<15}{r['python_s']:>12.4f}{'-':>12}{'-':>10}  -")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if all(r.get("identical", True) for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
