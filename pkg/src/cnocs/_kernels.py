"""Ray-casting kernels: per-pixel slab tests against every oriented box.

Two interchangeable implementations of the same arithmetic:

  - a numba @njit kernel parallelized over pixel rows (the default), and
  - a pure-numpy vectorized fallback.

Set CNOCS_NO_NUMBA=1 to force the fallback; it is also selected
automatically when numba is unavailable. `geometry_pass` dispatches.

Both produce, for an (H, W) image and N boxes:
  obj_idx  (H, W) int32   winning object index, -1 for background
  hit_t    (H, W) float64 hit distance along the unit pixel ray, inf for bg
  ncoords  (H, W, 3)      normalized object-frame coordinates in [-1, 1]

Ties in hit distance go to the lower object index. A hit requires
t > RAY_EPS along the forward ray.
"""

from __future__ import annotations

import os
import warnings

import numpy as np

RAY_EPS = 1e-6
_PARALLEL_EPS = 1e-12  # |dir component| below this treats the ray as slab-parallel

USE_NUMBA = os.environ.get("CNOCS_NO_NUMBA", "").strip() not in ("1", "true", "yes")
if USE_NUMBA:
    try:
        # The threading-layer probe warns when an old TBB is installed; numba
        # falls back to another layer on its own, so the warning is noise.
        warnings.filterwarnings("ignore", message=".*TBB threading layer.*")
        from numba import njit, prange
    except ImportError:
        USE_NUMBA = False

__all__ = ["RAY_EPS", "USE_NUMBA", "geometry_pass", "geometry_pass_numpy", "slab_hit"]


def slab_hit(origin_obj: np.ndarray, dir_obj: np.ndarray, half: np.ndarray) -> float:
    """Scalar slab test in the box frame; returns hit t or inf.

    The smallest t > RAY_EPS at which the ray enters or exits the box, so a
    ray starting inside still reports the exit face.
    """
    tmin = -np.inf
    tmax = np.inf
    for a in range(3):
        o = origin_obj[a]
        d = dir_obj[a]
        h = half[a]
        if abs(d) < _PARALLEL_EPS:
            if abs(o) > h:
                return np.inf
        else:
            t1 = (-h - o) / d
            t2 = (h - o) / d
            if t1 > t2:
                t1, t2 = t2, t1
            if t1 > tmin:
                tmin = t1
            if t2 < tmax:
                tmax = t2
    if tmin > tmax:
        return np.inf
    if tmin > RAY_EPS:
        return tmin
    if tmax > RAY_EPS:
        return tmax
    return np.inf


def _geometry_pass_py(fx, fy, cx, cy, width, height, centers, rots, halves,
                      obj_idx, hit_t, ncoords):
    """Row-parallel scalar kernel; compiled by numba when enabled."""
    n = centers.shape[0]
    for v in prange(height):
        for u in range(width):
            dx = (u + 0.5 - cx) / fx
            dy = (v + 0.5 - cy) / fy
            inv = 1.0 / np.sqrt(dx * dx + dy * dy + 1.0)
            rdx = dx * inv
            rdy = dy * inv
            rdz = inv
            best_t = np.inf
            best_i = -1
            for i in range(n):
                # object frame: origin' = -R^T c, dir' = R^T d
                ox = -(rots[i, 0, 0] * centers[i, 0] + rots[i, 1, 0] * centers[i, 1]
                       + rots[i, 2, 0] * centers[i, 2])
                oy = -(rots[i, 0, 1] * centers[i, 0] + rots[i, 1, 1] * centers[i, 1]
                       + rots[i, 2, 1] * centers[i, 2])
                oz = -(rots[i, 0, 2] * centers[i, 0] + rots[i, 1, 2] * centers[i, 1]
                       + rots[i, 2, 2] * centers[i, 2])
                ddx = rots[i, 0, 0] * rdx + rots[i, 1, 0] * rdy + rots[i, 2, 0] * rdz
                ddy = rots[i, 0, 1] * rdx + rots[i, 1, 1] * rdy + rots[i, 2, 1] * rdz
                ddz = rots[i, 0, 2] * rdx + rots[i, 1, 2] * rdy + rots[i, 2, 2] * rdz
                tmin = -np.inf
                tmax = np.inf
                miss = False
                for a in range(3):
                    if a == 0:
                        o = ox
                        d = ddx
                    elif a == 1:
                        o = oy
                        d = ddy
                    else:
                        o = oz
                        d = ddz
                    h = halves[i, a]
                    if abs(d) < _PARALLEL_EPS:
                        if abs(o) > h:
                            miss = True
                            break
                    else:
                        t1 = (-h - o) / d
                        t2 = (h - o) / d
                        if t1 > t2:
                            t1, t2 = t2, t1
                        if t1 > tmin:
                            tmin = t1
                        if t2 < tmax:
                            tmax = t2
                if miss or tmin > tmax:
                    continue
                if tmin > RAY_EPS:
                    t = tmin
                elif tmax > RAY_EPS:
                    t = tmax
                else:
                    continue
                if t < best_t:
                    best_t = t
                    best_i = i
            obj_idx[v, u] = best_i
            hit_t[v, u] = best_t
            if best_i >= 0:
                i = best_i
                px = best_t * rdx - centers[i, 0]
                py = best_t * rdy - centers[i, 1]
                pz = best_t * rdz - centers[i, 2]
                qx = rots[i, 0, 0] * px + rots[i, 1, 0] * py + rots[i, 2, 0] * pz
                qy = rots[i, 0, 1] * px + rots[i, 1, 1] * py + rots[i, 2, 1] * pz
                qz = rots[i, 0, 2] * px + rots[i, 1, 2] * py + rots[i, 2, 2] * pz
                nx = qx / halves[i, 0]
                ny = qy / halves[i, 1]
                nz = qz / halves[i, 2]
                ncoords[v, u, 0] = min(1.0, max(-1.0, nx))
                ncoords[v, u, 1] = min(1.0, max(-1.0, ny))
                ncoords[v, u, 2] = min(1.0, max(-1.0, nz))


if USE_NUMBA:
    _geometry_pass_jit = njit(parallel=True, cache=True)(_geometry_pass_py)
else:
    prange = range  # lets _geometry_pass_py run uncompiled if ever called


def geometry_pass_numpy(fx, fy, cx, cy, width, height, centers, rots, halves):
    """Vectorized fallback: same slab arithmetic over pixels x boxes at once."""
    n = centers.shape[0]
    u = np.arange(width, dtype=np.float64)
    v = np.arange(height, dtype=np.float64)
    dx = (u[None, :] + 0.5 - cx) / fx
    dy = (v[:, None] + 0.5 - cy) / fy
    dx, dy = np.broadcast_arrays(dx, dy)
    inv = 1.0 / np.sqrt(dx * dx + dy * dy + 1.0)
    dirs = np.stack([dx * inv, dy * inv, inv], axis=-1)  # (H, W, 3)

    hit_t = np.full((height, width), np.inf)
    obj_idx = np.full((height, width), -1, dtype=np.int32)
    ncoords = np.zeros((height, width, 3))
    if n == 0:
        return obj_idx, hit_t, ncoords

    t_all = np.empty((n, height, width))
    for i in range(n):
        r = rots[i]
        o = -(r.T @ centers[i])  # origin in the box frame, same for all rays
        d = dirs @ r  # R^T applied to every direction
        h = halves[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (-h - o) / d
            tb = (h - o) / d
        t_lo = np.minimum(ta, tb)
        t_hi = np.maximum(ta, tb)
        par = np.abs(d) < _PARALLEL_EPS
        inside = (np.abs(o) <= h)[None, None, :] & np.ones_like(par)
        t_lo = np.where(par, np.where(inside, -np.inf, np.inf), t_lo)
        t_hi = np.where(par, np.where(inside, np.inf, -np.inf), t_hi)
        tmin = t_lo.max(axis=-1)
        tmax = t_hi.min(axis=-1)
        t = np.where(tmin > RAY_EPS, tmin, np.where(tmax > RAY_EPS, tmax, np.inf))
        t_all[i] = np.where(tmin <= tmax, t, np.inf)

    obj_idx = np.where(np.isfinite(t_all).any(axis=0),
                       t_all.argmin(axis=0).astype(np.int32), np.int32(-1))
    hit_t = t_all.min(axis=0)

    fg = obj_idx >= 0
    for i in range(n):
        sel = fg & (obj_idx == i)
        if not sel.any():
            continue
        p = hit_t[sel, None] * dirs[sel] - centers[i]
        q = p @ rots[i]
        ncoords[sel] = np.clip(q / halves[i], -1.0, 1.0)
    return obj_idx, hit_t, ncoords


def geometry_pass(camera, boxes):
    """Cast one ray per pixel of `camera` against `boxes` (list of OrientedBox)."""
    n = len(boxes)
    centers = np.zeros((n, 3))
    rots = np.zeros((n, 3, 3))
    halves = np.zeros((n, 3))
    for i, b in enumerate(boxes):
        centers[i] = b.center
        rots[i] = b.rotation.matrix()
        halves[i] = b.size / 2.0
    if not USE_NUMBA:
        return geometry_pass_numpy(camera.fx, camera.fy, camera.cx, camera.cy,
                                   camera.width, camera.height, centers, rots, halves)
    obj_idx = np.full((camera.height, camera.width), -1, dtype=np.int32)
    hit_t = np.full((camera.height, camera.width), np.inf)
    ncoords = np.zeros((camera.height, camera.width, 3))
    _geometry_pass_jit(camera.fx, camera.fy, camera.cx, camera.cy,
                       camera.width, camera.height, centers, rots, halves,
                       obj_idx, hit_t, ncoords)
    return obj_idx, hit_t, ncoords
