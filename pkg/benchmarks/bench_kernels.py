"""Benchmark the compiled box kernels against the numpy fallback.

Runs every kernel on random inputs at a few sizes, checks that the two
backends agree bit for bit, and prints per-kernel timings. Exits nonzero
if the compiled extension is unavailable or any output differs.

    python benchmarks/bench_kernels.py [--sizes 1000,100000] [--repeats 30]
"""

import argparse
import sys
import time

import numpy as np


def random_boxes(rng, n):
    xy = rng.uniform(-50.0, 300.0, size=(n, 2))
    wh = rng.uniform(1e-3, 200.0, size=(n, 2))
    return np.ascontiguousarray(np.hstack([xy, wh]))


def cases(rng, n):
    a = random_boxes(rng, n)
    b = random_boxes(rng, n)
    ious = rng.uniform(0.0, 1.0, size=n)
    dists = rng.uniform(0.0, 3.0, size=n)
    grid = np.arange(101) / 100.0
    return [
        ("iou_pairs", (a, b)),
        ("center_dist_pairs", (a, b)),
        ("fraction_above", (ious, grid)),
        ("fraction_below", (dists, grid)),
        ("extent_before_collapse", (ious, grid)),
    ]


def best_of(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="1000,100000",
                        help="comma-separated input lengths")
    parser.add_argument("--repeats", type=int, default=30,
                        help="timing repeats; the best run is reported")
    parser.add_argument("--seed", type=int, default=20240)
    args = parser.parse_args(argv)

    try:
        from fpvbench import _kernels as native
    except ImportError:
        print("compiled extension not built; nothing to compare",
              file=sys.stderr)
        return 1
    from fpvbench import _kernels_py as pure

    rng = np.random.default_rng(args.seed)
    sizes = [int(s) for s in args.sizes.split(",")]
    mismatches = 0
    print(f"{'kernel':<24} {'n':>8} {'python':>12} {'native':>12} "
          f"{'speedup':>8}  agree")
    for n in sizes:
        for name, call_args in cases(rng, n):
            native_out = getattr(native, name)(*call_args)
            pure_out = getattr(pure, name)(*call_args)
            agree = np.array_equal(native_out, pure_out)
            mismatches += not agree
            t_pure = best_of(getattr(pure, name), call_args, args.repeats)
            t_native = best_of(getattr(native, name), call_args, args.repeats)
            print(f"{name:<24} {n:>8} {t_pure * 1e6:>10.1f}us "
                  f"{t_native * 1e6:>10.1f}us {t_pure / t_native:>7.2f}x  "
                  f"{'yes' if agree else 'NO'}")
    if mismatches:
        print(f"{mismatches} kernel output(s) differ between backends",
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
