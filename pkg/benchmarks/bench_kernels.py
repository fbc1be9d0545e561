"""Compare the jit-compiled RBF kernel assembly against the numpy fallback.

The fallback is selected by the SUBAPSNAP_NO_NUMBA environment flag, which
must be set before the package is imported; this script therefore re-execs
itself once with the flag set and merges the two timing tables.

Usage: python3 benchmarks/bench_kernels.py [--n 2000] [--rows 80] [--reps 50]
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

FLAG = "SUBAPSNAP_NO_NUMBA"


def measure(n: int, rows: int, reps: int) -> dict:
    from subapsnap import _kernels

    rng = np.random.default_rng(0)
    points = rng.standard_normal(n) * 3.0
    idx = np.sort(rng.choice(n, size=rows, replace=False))
    test = rng.standard_normal(rows) * 3.0

    # warm-up triggers jit compilation; excluded from timings
    _kernels.rbf_rows(points, idx, 1.0, 1e-3)
    _kernels.rbf_cross(test, points, 1.0)

    out = {"backend": "numpy" if os.environ.get(FLAG) else "numba"}
    for name, fn in (
        ("rbf_rows", lambda: _kernels.rbf_rows(points, idx, 1.0, 1e-3)),
        ("rbf_cross", lambda: _kernels.rbf_cross(test, points, 1.0)),
    ):
        times = []
        for _ in range(reps):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        out[name] = float(np.median(times))
    return out


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, default=2000)
    parser.add_argument("--rows", type=int, default=80)
    parser.add_argument("--reps", type=int, default=50)
    parser.add_argument("--emit-json", action="store_true",
                        help="print one backend's timings as JSON (internal)")
    args = parser.parse_args()

    if args.emit_json:
        print(json.dumps(measure(args.n, args.rows, args.reps)))
        return 0

    results = []
    for flag in ("", "1"):
        env = dict(os.environ)
        if flag:
            env[FLAG] = flag
        else:
            env.pop(FLAG, None)
        proc = subprocess.run(
            [sys.executable, __file__, "--emit-json", "--n", str(args.n),
             "--rows", str(args.rows), "--reps", str(args.reps)],
            env=env, capture_output=True, text=True, check=True)
        results.append(json.loads(proc.stdout.strip().splitlines()[-1]))

    print(f"n={args.n} rows={args.rows} reps={args.reps} (median seconds)")
    print(f"{'kernel':<12}" + "".join(f"{r['backend']:>12}" for r in results)
          + f"{'speedup':>10}")
    for name in ("rbf_rows", "rbf_cross"):
        a, b = results[0][name], results[1][name]
        print(f"{name:<12}{a:>12.2e}{b:>12.2e}{b / a:>10.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
