"""Timing comparison of the compiled geometry kernels vs the NumPy fallback.

Run:  python3 benchmarks/bench_kernels.py [--points 200000] [--repeats 5]
"""

import argparse
import time

import numpy as np

from divcurl._kernels import implementations
from divcurl.domains import gallery


def _bench(fn, args, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--koch-level", type=int, default=4)
    args = ap.parse_args()

    dom = gallery("koch_snowflake", level=args.koch_level)
    poly = dom.polygon
    rng = np.random.default_rng(0)
    lo, hi = dom.bounding_box(pad=0.0)
    pts = rng.uniform(lo, hi, size=(args.points, 2))
    blo = rng.uniform(lo, hi, size=(args.points // 4, 2))
    bhi = blo + rng.uniform(0.01, 0.1, size=blo.shape)

    impls = implementations()
    if "cython" not in impls:
        print("compiled kernels unavailable; showing the fallback only")

    cases = [
        ("points_in_polygon", "points_in_polygon", (pts, poly)),
        ("points_boundary_distance", "points_boundary_distance", (pts, poly)),
        ("boxes_boundary_distance", "boxes_boundary_distance", (blo, bhi, poly)),
    ]
    segs = len(poly)
    print(f"polygon: koch_snowflake({args.koch_level}), {segs} vertices")
    print(f"{'kernel':<28}" + "".join(f"{name:>12}" for name in impls) + f"{'speedup':>10}")
    for label, fname, fargs in cases:
        times = {}
        results = {}
        for name, mod in impls.items():
            fn = getattr(mod, fname)
            results[name] = np.asarray(fn(*fargs))
            times[name] = _bench(fn, fargs, args.repeats)
        if len(results) == 2:
            a, b = results.values()
            assert a.shape == b.shape
            gap = float(np.max(np.abs(a.astype(np.float64) - b.astype(np.float64))))
            assert gap <= 1e-12, f"{label}: implementations disagree by {gap}"
        row = f"{label:<28}"
        for name in impls:
            row += f"{times[name] * 1e3:>10.2f}ms"
        if "cython" in times and "numpy" in times:
            row += f"{times['numpy'] / times['cython']:>9.2f}x"
        print(row)


if __name__ == "__main__":
    main()
