"""Time the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--rounds 500] [--repeat 3] [--csv out.csv]

The fallback is the same source run without compilation (``.py_func``), which
is exactly what ``LAYERED_PAGING_DISABLE_NUMBA=1`` selects; cover-time
sampling uses its separate vectorised numpy implementation.
"""
import argparse
import csv
import sys
import time

import numpy as np

from layered_paging import kernels
from layered_paging._accel import NUMBA_ENABLED
from layered_paging.generators import ZipfParams, gen_zipf
from layered_paging.model import ModelShape


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(rounds, samples):
    tr = gen_zipf(ModelShape(8, 32), ZipfParams(1.2), rounds, seed=0)
    pages = tr.page_indices()
    times = np.arange(1, pages.size + 1, dtype=np.int64)
    u = np.random.default_rng(0).random(pages.size)
    k = 64
    return [
        ("lru", len(pages), lambda f: f(pages, k), kernels.lru_hits),
        ("llru", len(pages), lambda f: f(pages, times, k, 32, 1), kernels.llru_hits),
        ("belady", len(pages), lambda f: f(pages, k), kernels.belady_hits),
        ("marking", len(pages), lambda f: f(pages, k, u), kernels.marking_hits),
        ("cover-time N=8 C=64", samples, lambda f: f(8, 64, samples, 1), None),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rounds", type=int, default=500, help="Zipf rounds (32 requests each)")
    ap.add_argument("--samples", type=int, default=5000, help="cover-time samples")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--csv")
    args = ap.parse_args(argv)
    if not NUMBA_ENABLED:
        print("numba is disabled or missing; nothing to compare", file=sys.stderr)
        return 1

    rows = []
    print(f"{'kernel':<22}{'size':>9}{'numba s':>11}{'numpy s':>11}{'speedup':>9}  same")
    for name, size, call, fn in cases(args.rounds, args.samples):
        if fn is None:
            jit, ref = kernels._cover_times_jit, kernels._cover_times_numpy
            call(jit)  # compile
            t_jit, a = best_of(lambda: call(jit), args.repeat)
            t_np, b = best_of(lambda: call(ref), args.repeat)
            same = f"means {a.mean():.2f}/{b.mean():.2f}"
        else:
            call(fn)
            t_jit, a = best_of(lambda: call(fn), args.repeat)
            t_np, b = best_of(lambda: call(fn.py_func), 1)
            same = str(bool(np.array_equal(a, b)))
        rows.append({"kernel": name, "size": size, "numba_s": t_jit, "numpy_s": t_np, "speedup": t_np / t_jit,
                     "same": same})
        print(f"{name:<22}{size:>9}{t_jit:>11.4f}{t_np:>11.4f}{t_np / t_jit:>8.1f}x  {same}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
