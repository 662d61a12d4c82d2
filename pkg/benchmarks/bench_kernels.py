"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--scale 1.0] [--repeat 3]

The first numba call compiles (or loads the on-disk cache), so it is made
once before timing.
"""
import argparse
import time

import numpy as np

from bilipext import Swap
from bilipext.kernels import SwapPack, odd_even_swaps, ratio_extremes, segment_distances, swap_chain


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(scale, rng):
    n = int(200_000 * scale)
    d = 3
    swaps = []
    for _ in range(200):
        x = rng.normal(size=d) * 3
        y = x + rng.normal(size=d)
        swaps.append(Swap(x, y, 0.3 * np.linalg.norm(y - x)))
    pack = SwapPack.concat([s.swap_pack() for s in swaps], d)
    P = rng.normal(size=(n, d)) * 3
    yield "swap_chain", f"{n} pts x 200 swaps", lambda impl: swap_chain(P, pack, impl=impl)

    m = int(3000 * scale ** 0.5)
    S = rng.normal(size=(m, 3))
    F = S @ rng.normal(size=(3, 3))
    yield "ratio_extremes", f"{m} pts, all pairs", lambda impl: ratio_extremes(S, F, impl=impl)

    k = int(500_000 * scale)
    segs = [rng.normal(size=(k, 3)) for _ in range(4)]
    yield "segment_distances", f"{k} pairs", lambda impl: segment_distances(*segs, impl=impl)

    keys = rng.permutation(int(4000 * scale ** 0.5))
    yield "odd_even_swaps", f"{len(keys)} keys", lambda impl: odd_even_swaps(keys, impl=impl)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=1.0)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<18} {'size':<24} {'numba s':>9} {'numpy s':>9} {'speedup':>8}")
    for name, size, run in cases(args.scale, rng):
        run("numba")  # compile / warm up
        a = best_of(lambda: run("numba"), args.repeat)
        b = best_of(lambda: run("numpy"), args.repeat)
        print(f"{name:<18} {size:<24} {a:>9.4f} {b:>9.4f} {b / a:>7.1f}x")


if __name__ == "__main__":
    main()
