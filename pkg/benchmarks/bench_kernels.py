"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Times one CG channel solve for a 64x64 region and one ROI scan over a
256x256 target at stride 1, per available backend.
"""

import argparse
import time

import numpy as np

from pbda import kernels
from pbda.core import BBox, ImageBuffer
from pbda.poisson import assemble_system
from pbda.roi import border_offsets, candidate_grid, RoiSearchConfig


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    target = ImageBuffer(rng.random((256, 256, 3)))
    source = ImageBuffer(rng.random((256, 256, 3)))
    box = BBox(96, 96, 64, 64)
    system = assemble_system(target, source, box, BBox(80, 120, 64, 64))
    rhs = np.ascontiguousarray(system.rhs[0])

    offsets = border_offsets(24, 24)
    colors = source.data[40 + offsets[:, 0], 40 + offsets[:, 1]]
    ys, xs = candidate_grid(256, 256, 24, 24, RoiSearchConfig(stride=1))
    tdata = np.ascontiguousarray(target.data)

    backends = kernels.available_backends()
    results = {}
    for name in sorted(backends):
        k = backends[name]
        cg = best_of(lambda: k.cg_solve(system.neighbors, rhs, 1e-6, 10 * system.n), args.repeat)
        roi = best_of(lambda: k.roi_scores(tdata, colors, offsets, ys, xs), args.repeat)
        results[name] = (cg, roi)

    print(f"{'backend':<8} {'cg 64x64 (ms)':>14} {'roi 256x256/s1 (ms)':>20}")
    for name, (cg, roi) in results.items():
        print(f"{name:<8} {cg * 1e3:>14.2f} {roi * 1e3:>20.2f}")
    if {"cython", "python"} <= set(results):
        c, p = results["cython"], results["python"]
        print(f"speedup  {p[0] / c[0]:>13.1f}x {p[1] / c[1]:>19.1f}x")


if __name__ == "__main__":
    main()
