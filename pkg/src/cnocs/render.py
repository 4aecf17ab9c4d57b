"""CNOCS map construction: per-pixel ray casting against oriented boxes,
depth-sorted occlusion, object-frame normalization, and channel encoding.

The per-pixel pipeline is: cast the pixel ray, keep the nearest box hit,
map the camera-space hit point into the box frame, normalize by the side
lengths to [-1, 1]^3, then encode that coordinate into channels. Three
encodings are supported:

  CONSTANT   3 channels: the box's (azimuth, elevation, roll) / pi,
             identical at every pixel of the object.
  IDENTITY   3 channels: the normalized coordinate itself.
  SPHERICAL  (L+1)^2 channels of amplitude-normalized real spherical
             harmonics of the coordinate's direction, optionally plus a
             radius channel (r / sqrt(3), so it also lies in [0, 1]).

Background pixels are 0 in all channels; the object-index map holds -1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import sph
from ._kernels import geometry_pass, slab_hit
from .scene import Camera, OrientedBox, Scene, transform_c2o

__all__ = [
    "NONE_INDEX",
    "Variant",
    "EncodingSpec",
    "CnocsMap",
    "intersect_ray_box",
    "resolve_occlusion",
    "normalize_object_point",
    "encode",
    "render_cnocs",
    "geometry_maps",
    "object_mask",
    "downsample_mask",
]

NONE_INDEX = -1


class Variant(enum.Enum):
    CONSTANT = "constant"
    IDENTITY = "identity"
    SPHERICAL = "spherical"


@dataclass(frozen=True)
class EncodingSpec:
    variant: Variant = Variant.IDENTITY
    degree: int = 2  # SPHERICAL only
    include_radius: bool = False  # SPHERICAL only

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be >= 0")

    @property
    def channels(self) -> int:
        if self.variant is Variant.SPHERICAL:
            return sph.num_channels(self.degree) + (1 if self.include_radius else 0)
        return 3

    @staticmethod
    def parse(variant: str, degree: int = 2, include_radius: bool = False) -> "EncodingSpec":
        try:
            v = Variant(variant.lower())
        except ValueError:
            raise ValueError(f"unknown encoding variant {variant!r}") from None
        return EncodingSpec(variant=v, degree=degree, include_radius=include_radius)


@dataclass(frozen=True)
class CnocsMap:
    width: int
    height: int
    data: np.ndarray  # (height, width, channels) float64 in [-1, 1]
    object_index: np.ndarray  # (height, width) int32, NONE_INDEX for background
    encoding: EncodingSpec

    @property
    def channels(self) -> int:
        return self.data.shape[2]


def intersect_ray_box(origin, direction, box: OrientedBox):
    """Nearest forward intersection of a ray with an oriented box.

    Returns (t, hit_point) with t > RAY_EPS, or None on a miss. Requires a
    unit direction.
    """
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    r = box.rotation.matrix()
    o = (origin - box.center) @ r
    d = direction @ r
    t = slab_hit(o, d, box.size / 2.0)
    if not np.isfinite(t):
        return None
    return t, origin + t * direction


def resolve_occlusion(camera: Camera, scene: Scene, pixel):
    """Winning object index and camera-space hit point at one pixel, or None.

    The ray goes through the pixel center; ties in distance break toward
    the lower object index.
    """
    u, v = pixel
    if not (0 <= u < camera.width and 0 <= v < camera.height):
        raise ValueError("pixel outside image bounds")
    direction = camera.pixel_ray(u, v)
    origin = np.zeros(3)
    best = None
    best_t = np.inf
    for i, box in enumerate(scene.objects):
        hit = intersect_ray_box(origin, direction, box)
        if hit is not None and hit[0] < best_t:
            best_t = hit[0]
            best = (i, hit[1])
    return best


def normalize_object_point(box: OrientedBox, hit_camera) -> np.ndarray:
    """Map a surface point to the box's [-1, 1]^3 frame (clamped)."""
    q = transform_c2o(box, hit_camera)
    return np.clip(2.0 * q / box.size, -1.0, 1.0)


def _spherical_channels(normalized: np.ndarray, spec: EncodingSpec) -> np.ndarray:
    n = np.atleast_2d(np.asarray(normalized, dtype=np.float64))
    r = np.linalg.norm(n, axis=-1)
    assert np.all(r > 0), "spherical encoding undefined at the origin"
    theta = np.arccos(np.clip(n[:, 2] / r, -1.0, 1.0))
    phi = np.arctan2(n[:, 1], n[:, 0])
    out = sph.eval_scaled(theta, phi, spec.degree)
    if spec.include_radius:
        out = np.concatenate([out, (r / math.sqrt(3.0))[:, None]], axis=-1)
    return out


def encode(spec: EncodingSpec, normalized, box: OrientedBox) -> np.ndarray:
    """Channel vector for one normalized surface coordinate."""
    if spec.variant is Variant.IDENTITY:
        return np.asarray(normalized, dtype=np.float64).copy()
    if spec.variant is Variant.CONSTANT:
        az, el, roll = box.rotation.euler()
        return np.array([az / math.pi, el / math.pi, roll / math.pi])
    return _spherical_channels(normalized, spec)[0]


def geometry_maps(scene: Scene):
    """Raw geometry pass over a scene: (object_index, hit_t, ncoords)."""
    return geometry_pass(scene.camera, scene.objects)


def render_cnocs(scene: Scene, spec: EncodingSpec = EncodingSpec()) -> CnocsMap:
    """Rasterize the scene into a CNOCS map. Deterministic for fixed inputs."""
    cam = scene.camera
    obj_idx, _, ncoords = geometry_pass(cam, scene.objects)
    data = np.zeros((cam.height, cam.width, spec.channels))
    fg = obj_idx >= 0

    if fg.any():
        if spec.variant is Variant.IDENTITY:
            data[fg] = ncoords[fg]
        elif spec.variant is Variant.CONSTANT:
            for i, box in enumerate(scene.objects):
                sel = obj_idx == i
                if sel.any():
                    az, el, roll = box.rotation.euler()
                    data[sel] = np.array([az, el, roll]) / math.pi
        else:
            data[fg] = _spherical_channels(ncoords[fg], spec)

    return CnocsMap(width=cam.width, height=cam.height, data=data,
                    object_index=obj_idx, encoding=spec)


def object_mask(cnocs_map: CnocsMap, i: int) -> np.ndarray:
    """Binary (H, W) mask of pixels the i-th object wins."""
    if i < 0:
        raise ValueError("object index must be >= 0")
    return cnocs_map.object_index == i


def downsample_mask(mask: np.ndarray, factor: int, threshold: float = 0.5) -> np.ndarray:
    """Area-average a binary mask into (H/factor, W/factor) cells, then
    keep cells whose coverage reaches `threshold`."""
    mask = np.asarray(mask)
    h, w = mask.shape
    if h % factor or w % factor:
        raise ValueError(f"mask shape {mask.shape} not divisible by factor {factor}")
    cells = mask.astype(np.float64).reshape(h // factor, factor, w // factor, factor)
    return cells.mean(axis=(1, 3)) >= threshold
