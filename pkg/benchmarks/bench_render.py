"""Benchmark the numba raster kernel against the pure-numpy fallback.

Run: python benchmarks/bench_render.py [--size 512] [--boxes 16] [--runs 5]

The numpy fallback is what CNOCS_NO_NUMBA=1 selects at import time; here
both paths run in one process for a side-by-side comparison.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from cnocs import Camera, OrientedBox, Rotation, Scene
from cnocs import _kernels


def build_scene(size: int, n_boxes: int, seed: int = 0) -> Scene:
    rng = np.random.default_rng(seed)
    cam = Camera(fx=float(size), fy=float(size), cx=size / 2, cy=size / 2,
                 width=size, height=size)
    boxes = []
    for i in range(n_boxes):
        z = rng.uniform(3, 9)
        u, v = rng.uniform(0.15, 0.85, 2) * size
        center = np.array([(u - cam.cx) / cam.fx * z, (v - cam.cy) / cam.fy * z, z])
        boxes.append(OrientedBox(center=center, size=rng.uniform(0.3, 1.5, 3),
                                 rotation=Rotation(rng.standard_normal(4)),
                                 label=f"box{i}"))
    return Scene(camera=cam, objects=tuple(boxes))


def time_fn(fn, runs: int, warmup: int = 2):
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(runs):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), float(np.median(times))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=512)
    parser.add_argument("--boxes", type=int, default=16)
    parser.add_argument("--runs", type=int, default=5)
    args = parser.parse_args()

    scene = build_scene(args.size, args.boxes)
    cam = scene.camera
    centers = np.array([b.center for b in scene.objects])
    rots = np.array([b.rotation.matrix() for b in scene.objects])
    halves = np.array([b.size / 2 for b in scene.objects])

    print(f"scene: {args.size}x{args.size}, {args.boxes} boxes, "
          f"{args.runs} timed runs (best / median)")

    np_best, np_med = time_fn(
        lambda: _kernels.geometry_pass_numpy(cam.fx, cam.fy, cam.cx, cam.cy,
                                             cam.width, cam.height,
                                             centers, rots, halves),
        args.runs,
    )
    print(f"numpy fallback : {np_best * 1e3:8.1f} ms / {np_med * 1e3:8.1f} ms")

    if not _kernels.USE_NUMBA:
        print("numba kernel   : unavailable (CNOCS_NO_NUMBA set or numba missing)")
        return

    nb_best, nb_med = time_fn(lambda: _kernels.geometry_pass(cam, scene.objects),
                              args.runs)
    print(f"numba kernel   : {nb_best * 1e3:8.1f} ms / {nb_med * 1e3:8.1f} ms")
    print(f"speedup        : {np_best / nb_best:8.1f}x (best)")

    idx_np, t_np, _ = _kernels.geometry_pass_numpy(cam.fx, cam.fy, cam.cx, cam.cy,
                                                   cam.width, cam.height,
                                                   centers, rots, halves)
    idx_nb, t_nb, _ = _kernels.geometry_pass(cam, scene.objects)
    agree = (idx_np == idx_nb).mean()
    fin = np.isfinite(t_np) & np.isfinite(t_nb)
    print(f"agreement      : {agree:.6%} winners, "
          f"max |dt| = {np.abs(t_np[fin] - t_nb[fin]).max():.2e}")


if __name__ == "__main__":
    main()
