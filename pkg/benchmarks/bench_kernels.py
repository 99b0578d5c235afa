"""Benchmark the compiled kernels against the interpreted fallback.

Runs the same timing payload in two child processes, one with numba
enabled and one with ``KALMANLAB_PURE_NUMPY=1``, verifies that both
modes produce the same numbers, and prints a speedup table.

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import json
import os
import subprocess
import sys
from time import perf_counter

import numpy as np

EIG_SIZES = (4, 8, 16, 32)
MG_LENGTH = 20_000


def payload(repeats):
    from kalmanlab import kernels
    from kalmanlab.numerics import JACOBI_REL_TOL, MAX_JACOBI_SWEEPS, make_rng

    out = {"numba": kernels.NUMBA_ENABLED, "timings": {}, "digest": {}}

    def eig(s):
        return kernels.jacobi_eigh(s, JACOBI_REL_TOL, MAX_JACOBI_SWEEPS)

    for n in EIG_SIZES:
        rng = make_rng(60, n)
        m = rng.standard_normal((n, n))
        s = 0.5 * (m + m.T)
        eig(s)  # warm-up / compile
        best = min(_timed(eig, s) for _ in range(repeats))
        out["timings"][f"jacobi_eigh n={n}"] = best
        if n == EIG_SIZES[-1]:
            out["digest"]["eigenvalues"] = sorted(eig(s)[0].tolist())

    args = (MG_LENGTH, 30, 0.2, 0.1, 10.0, 1.0, 1.2)
    kernels.mackey_glass_euler(*args)
    best = min(
        _timed(kernels.mackey_glass_euler, *args) for _ in range(repeats)
    )
    out["timings"][f"mackey_glass_euler T={MG_LENGTH}"] = best
    series, ok = kernels.mackey_glass_euler(*args)
    out["digest"]["mg_ok"] = int(ok)
    out["digest"]["mg_tail"] = series[-5:].tolist()
    return out


def _timed(fn, *args):
    t0 = perf_counter()
    fn(*args)
    return perf_counter() - t0


def run_child(pure_numpy, repeats):
    env = dict(os.environ)
    env.pop("KALMANLAB_PURE_NUMPY", None)
    if pure_numpy:
        env["KALMANLAB_PURE_NUMPY"] = "1"
    env["KALMANLAB_BENCH_CHILD"] = "1"
    proc = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--repeats", str(repeats)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(proc.stdout)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    if os.environ.get("KALMANLAB_BENCH_CHILD"):
        json.dump(payload(args.repeats), sys.stdout)
        return 0

    jit = run_child(pure_numpy=False, repeats=args.repeats)
    pure = run_child(pure_numpy=True, repeats=args.repeats)

    for key in ("eigenvalues", "mg_tail"):
        if not np.allclose(jit["digest"][key], pure["digest"][key],
                           rtol=0, atol=1e-12):
            print(f"mode mismatch in {key}:", file=sys.stderr)
            print(f"  jit:  {jit['digest'][key]}", file=sys.stderr)
            print(f"  pure: {pure['digest'][key]}", file=sys.stderr)
            return 1

    if not jit["numba"]:
        print("numba unavailable in this environment; both runs interpreted\n")

    width = max(len(k) for k in jit["timings"])
    print(f"{'kernel':<{width}}  {'jit':>10}  {'pure numpy':>10}  {'speedup':>8}")
    for key in jit["timings"]:
        tj, tp = jit["timings"][key], pure["timings"][key]
        print(f"{key:<{width}}  {tj:>10.2e}  {tp:>10.2e}  {tp / tj:>7.1f}x")
    print("\noutputs match across modes (atol 1e-12)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
