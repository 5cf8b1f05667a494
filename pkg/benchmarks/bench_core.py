"""Compiled core vs numpy fallback, kernel by kernel.

    python3 benchmarks/bench_core.py [--repeat 5]

Prints best-of-``repeat`` wall times and the speedup for each kernel at
sizes typical of a BQMC run, plus an end-to-end BQMC fit run in a
subprocess under each backend.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from mlqmc import _fallback

try:
    from mlqmc import _core
except ImportError:
    sys.exit("compiled core not built; run `pip install -e . --no-build-isolation` first")


def cases(rng):
    n, d = 2 ** 14, 32
    cols = rng.integers(0, 2 ** 52, size=(d, 20), dtype=np.uint64)
    z = _core.digital_net_ints(cols, 0, n)
    rt = _core.dsi_values(z, 52, [1, 2, 3, 4])
    beta, eta = np.full(4, 0.25), np.full(d, 0.5)
    kcol, v = rng.standard_normal(n), rng.standard_normal(n)
    a = rng.standard_normal((4, 2 ** 16))
    m = 2 ** 10
    lo, up = -np.ones((m, 256)), -np.ones((m, 256))
    diag, rhs = np.full((m, 256), 2.5), np.ones((m, 256))
    return [
        ("fwht_rows 4 x 2^16", lambda b: b.fwht_rows(a.copy())),
        ("digital_net_ints 2^14 x 32", lambda b: b.digital_net_ints(cols, 0, n)),
        ("dsi_values 2^14 x 32 x 4", lambda b: b.dsi_values(z, 52, [1, 2, 3, 4])),
        ("product_logcol 2^14 x 32", lambda b: b.product_logcol(rt, beta, eta)),
        ("product_grad 2^14 x 32", lambda b: b.product_grad(rt, beta, eta, kcol, v)),
        ("thomas_rows 2^10 x 256", lambda b: b.thomas_rows(lo, diag, up, rhs)),
    ]


END_TO_END = ("import time; from mlqmc import estimators as E, problems as P; "
              "from mlqmc.rng import Streams; t = time.perf_counter(); "
              "E.run_bqmc(P.get_problem('sumxex', d=16), 2 ** 13, streams=Streams(0)); "
              "print(time.perf_counter() - t)")


def end_to_end(pure):
    env = dict(os.environ)
    env.pop("MLQMC_PURE_PYTHON", None)
    if pure:
        env["MLQMC_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True,
                         text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<30} {'compiled':>10} {'fallback':>10} {'speedup':>8}")
    for name, fn in cases(rng):
        tc = min(timeit.repeat(lambda: fn(_core), number=1, repeat=args.repeat))
        tp = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat))
        print(f"{name:<30} {tc:>9.4f}s {tp:>9.4f}s {tp / tc:>7.1f}x")
    tc, tp = end_to_end(False), end_to_end(True)
    print(f"{'BQMC sumxex d=16 to 2^13':<30} {tc:>9.4f}s {tp:>9.4f}s {tp / tc:>7.1f}x")


if __name__ == "__main__":
    main()
