"""Time the numba and numpy tracer kernels on the madrid-like preset.

    python3 benchmarks/bench_raytrace.py [--points 200] [--repeat 3]

Prints per-call times for both backends and checks their outputs agree.
"""

import argparse
import time

import numpy as np

from nlosloc import _kernels
from nlosloc.scene import load_scene


def street_points(scene, n, seed=0):
    rng = np.random.default_rng(seed)
    pts = []
    lo, hi = scene.bounds[:2], scene.bounds[2:]
    while len(pts) < n:
        p = np.r_[rng.uniform(lo, hi), scene.ue_height]
        inside = ((scene.boxes[:, 0] <= p[0]) & (p[0] <= scene.boxes[:, 2])
                  & (scene.boxes[:, 1] <= p[1]) & (p[1] <= scene.boxes[:, 3]))
        if not inside.any():
            pts.append(p)
    return np.array(pts)


def bench(fn, scene, pts, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        for g in scene.gnbs:
            for p in pts:
                fn(g.position, p, scene.boxes, scene.walls, 2)
        best = min(best, time.perf_counter() - t)
    return best / (len(pts) * len(scene.gnbs))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    scene = load_scene("madrid-like")
    pts = street_points(scene, args.points)
    g = scene.gnbs[0].position
    results = {"numpy": bench(_kernels.trace_numpy, scene, pts, args.repeat)}
    if _kernels.HAVE_NUMBA:
        _kernels.trace_numba(g, pts[0], scene.boxes, scene.walls, 2)  # compile
        results["numba"] = bench(_kernels.trace_numba, scene, pts, args.repeat)
        for p in pts[:20]:
            a = _kernels.trace_numpy(g, p, scene.boxes, scene.walls, 2)
            b = _kernels.trace_numba(g, p, scene.boxes, scene.walls, 2)
            np.testing.assert_allclose(a, b, rtol=0, atol=1e-9)
    for name, t in results.items():
        print(f"{name:6s} {t * 1e3:8.3f} ms per (gNB, UE) trace")
    if "numba" in results:
        print(f"speedup {results['numpy'] / results['numba']:.1f}x")


if __name__ == "__main__":
    main()
