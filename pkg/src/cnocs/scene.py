"""Scene data model: pinhole camera, oriented boxes, rigid transforms, projection.

Coordinate conventions (fixed for the whole toolkit):
  - Camera sits at the origin, +z points into the scene, +x right, +y down
    (pixel row order). All geometry lives in this camera frame.
  - Pixel (u, v): u is the column, v is the row; (0, 0) is the top-left
    image corner.
  - Euler angles (azimuth, elevation, roll), radians: azimuth rotates about
    camera-up (-y), then elevation about camera-right (+x), then roll about
    the forward axis (+z), composed intrinsically in that order.
  - Box sizes are full side lengths, not half-extents.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Camera",
    "Rotation",
    "OrientedBox",
    "Scene",
    "Rect",
    "RectProjection",
    "SceneValidationError",
    "DegenerateBoxError",
    "project_point",
    "project_box_to_rect",
    "compose",
    "transform_c2o",
    "transform_o2c",
    "scene_to_dict",
    "scene_from_dict",
    "load_scene",
    "dump_scene",
]


class SceneValidationError(ValueError):
    """A scene document failed structural validation.

    ``path`` names the offending field, e.g. ``objects[2].size[0]``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class DegenerateBoxError(SceneValidationError):
    """A box in an otherwise well-formed document has a non-positive size."""


def _unit_quat(q: np.ndarray) -> np.ndarray:
    n2 = float(q @ q)
    if n2 <= 0.0 or not math.isfinite(n2):
        raise ValueError("zero or non-finite quaternion")
    # Leave already-unit quaternions untouched so serialization round-trips
    # bit-exactly.
    if abs(n2 - 1.0) < 1e-12:
        return q
    return q / math.sqrt(n2)


@dataclass(frozen=True)
class Rotation:
    """Unit quaternion (w, x, y, z), Hamilton convention."""

    quat: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.quat, dtype=np.float64).reshape(4)
        object.__setattr__(self, "quat", _unit_quat(q))

    @staticmethod
    def identity() -> "Rotation":
        return Rotation(np.array([1.0, 0.0, 0.0, 0.0]))

    @staticmethod
    def from_axis_angle(axis, angle: float) -> "Rotation":
        axis = np.asarray(axis, dtype=np.float64)
        axis = axis / np.linalg.norm(axis)
        half = 0.5 * angle
        return Rotation(np.concatenate(([math.cos(half)], math.sin(half) * axis)))

    @staticmethod
    def from_euler(azimuth: float, elevation: float, roll: float) -> "Rotation":
        """Compose azimuth about camera-up (-y), elevation about +x, roll about +z."""
        qa = Rotation.from_axis_angle((0.0, -1.0, 0.0), azimuth)
        qe = Rotation.from_axis_angle((1.0, 0.0, 0.0), elevation)
        qr = Rotation.from_axis_angle((0.0, 0.0, 1.0), roll)
        return compose(compose(qa, qe), qr)

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Rotation":
        m = np.asarray(m, dtype=np.float64)
        t = np.trace(m)
        if t > 0:
            s = math.sqrt(t + 1.0) * 2.0
            w = 0.25 * s
            x = (m[2, 1] - m[1, 2]) / s
            y = (m[0, 2] - m[2, 0]) / s
            z = (m[1, 0] - m[0, 1]) / s
        elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
            s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
            w = (m[2, 1] - m[1, 2]) / s
            x = 0.25 * s
            y = (m[0, 1] + m[1, 0]) / s
            z = (m[0, 2] + m[2, 0]) / s
        elif m[1, 1] > m[2, 2]:
            s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
            w = (m[0, 2] - m[2, 0]) / s
            x = (m[0, 1] + m[1, 0]) / s
            y = 0.25 * s
            z = (m[1, 2] + m[2, 1]) / s
        else:
            s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
            w = (m[1, 0] - m[0, 1]) / s
            x = (m[0, 2] + m[2, 0]) / s
            y = (m[1, 2] + m[2, 1]) / s
            z = 0.25 * s
        return Rotation(np.array([w, x, y, z]))

    def matrix(self) -> np.ndarray:
        w, x, y, z = self.quat
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def euler(self) -> tuple[float, float, float]:
        """Return (azimuth, elevation, roll); see `from_euler` for the convention.

        With R = R_up(az) R_x(el) R_z(roll): R[1,2] = -sin(el),
        R[1,0] = cos(el) sin(roll), R[1,1] = cos(el) cos(roll),
        R[0,2] = -sin(az) cos(el), R[2,2] = cos(az) cos(el).
        """
        m = self.matrix()
        elevation = math.asin(max(-1.0, min(1.0, -m[1, 2])))
        roll = math.atan2(m[1, 0], m[1, 1])
        azimuth = math.atan2(-m[0, 2], m[2, 2])
        return azimuth, elevation, roll

    @property
    def azimuth(self) -> float:
        return self.euler()[0]

    def inverse(self) -> "Rotation":
        w, x, y, z = self.quat
        return Rotation(np.array([w, -x, -y, -z]))

    def apply(self, p) -> np.ndarray:
        return np.asarray(p, dtype=np.float64) @ self.matrix().T


def compose(a: Rotation, b: Rotation) -> Rotation:
    """Quaternion product a*b, renormalized: rotate by b first, then a."""
    w1, x1, y1, z1 = a.quat
    w2, x2, y2, z2 = b.quat
    return Rotation(
        np.array(
            [
                w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
                w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
                w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
                w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
            ]
        )
    )


@dataclass(frozen=True)
class Camera:
    """Pinhole intrinsics plus image resolution."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (self.width >= 1 and self.height >= 1):
            raise ValueError("image resolution must be at least 1x1")

    @staticmethod
    def default(width: int = 512, height: int = 512) -> "Camera":
        # Arbitrary desk-scale default; overridable everywhere it is used.
        f = float(max(width, height))
        return Camera(fx=f, fy=f, cx=width / 2.0, cy=height / 2.0, width=width, height=height)

    def pixel_ray(self, u: float, v: float) -> np.ndarray:
        """Unit direction through pixel center (u + 0.5, v + 0.5)."""
        d = np.array([(u + 0.5 - self.cx) / self.fx, (v + 0.5 - self.cy) / self.fy, 1.0])
        return d / np.linalg.norm(d)


@dataclass(frozen=True)
class OrientedBox:
    """9-DoF pose: camera-space center, full side lengths, rotation, label."""

    center: np.ndarray
    size: np.ndarray
    rotation: Rotation = field(default_factory=Rotation.identity)
    label: str = ""

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        s = np.asarray(self.size, dtype=np.float64).reshape(3)
        if not np.all(s > 0):
            raise ValueError("box size components must be strictly positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "size", s)

    def corners(self) -> np.ndarray:
        """The 8 corners, shape (8, 3): center + R @ (+-size/2 per axis)."""
        half = self.size / 2.0
        signs = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
            dtype=np.float64,
        )
        return self.center + (signs * half) @ self.rotation.matrix().T


def transform_c2o(box: OrientedBox, p) -> np.ndarray:
    """Camera-space point(s) into the box's object frame: R^T (p - center)."""
    p = np.asarray(p, dtype=np.float64)
    return (p - box.center) @ box.rotation.matrix()


def transform_o2c(box: OrientedBox, q) -> np.ndarray:
    """Inverse of `transform_c2o`: R q + center."""
    q = np.asarray(q, dtype=np.float64)
    return q @ box.rotation.matrix().T + box.center


@dataclass(frozen=True)
class Scene:
    camera: Camera
    objects: tuple[OrientedBox, ...] = ()
    prompt: str = ""
    object_prompts: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if self.object_prompts is not None:
            prompts = tuple(self.object_prompts)
            if len(prompts) != len(self.objects):
                raise ValueError("object_prompts must align with objects")
            object.__setattr__(self, "object_prompts", prompts)

    def prompt_for(self, i: int) -> str:
        if self.object_prompts is not None:
            return self.object_prompts[i]
        return self.objects[i].label


# ---------------------------------------------------------------------------
# Projection
# ---------------------------------------------------------------------------

def project_point(camera: Camera, p) -> tuple[float, float] | None:
    """Project a camera-space point; None marks a point at or behind the camera."""
    x, y, z = np.asarray(p, dtype=np.float64)
    if z <= 0:
        return None
    return (camera.fx * x / z + camera.cx, camera.fy * y / z + camera.cy)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in pixels, [x0, x1] x [y0, y1]."""

    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def area(self) -> float:
        return max(0.0, self.x1 - self.x0) * max(0.0, self.y1 - self.y0)

    @property
    def is_empty(self) -> bool:
        return self.x1 <= self.x0 or self.y1 <= self.y0

    def as_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]


@dataclass(frozen=True)
class RectProjection:
    """Result of projecting a box: clipped corner hull plus visibility state."""

    rect: Rect | None
    partial: bool  # some, but not all, corners were behind the camera


def project_box_to_rect(camera: Camera, box: OrientedBox) -> RectProjection:
    """Min/max hull of the projected corners, clipped to the image.

    Corners behind the camera are skipped; if any were skipped while others
    projected, the result carries the partial-visibility flag. rect is None
    when every corner is behind the camera or the hull misses the image.
    """
    pts = [project_point(camera, c) for c in box.corners()]
    visible = [p for p in pts if p is not None]
    partial = 0 < len(visible) < 8
    if not visible:
        return RectProjection(rect=None, partial=False)
    us = [p[0] for p in visible]
    vs = [p[1] for p in visible]
    x0 = max(min(us), 0.0)
    y0 = max(min(vs), 0.0)
    x1 = min(max(us), float(camera.width))
    y1 = min(max(vs), float(camera.height))
    if x1 <= x0 or y1 <= y0:
        return RectProjection(rect=None, partial=partial)
    return RectProjection(rect=Rect(x0, y0, x1, y1), partial=partial)


# ---------------------------------------------------------------------------
# Scene document (the JSON contract shared by CLI, service, and UI)
# ---------------------------------------------------------------------------

def _expect(doc: dict, key: str, path: str):
    if not isinstance(doc, dict):
        raise SceneValidationError(path or ".", "expected an object")
    if key not in doc:
        raise SceneValidationError(f"{path}{key}" if not path else f"{path}.{key}", "missing field")
    return doc[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SceneValidationError(path, "expected a number")
    if not math.isfinite(value):
        raise SceneValidationError(path, "expected a finite number")
    return float(value)


def _vec(value, n: int, path: str) -> list[float]:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise SceneValidationError(path, f"expected a list of {n} numbers")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def scene_from_dict(doc: dict) -> Scene:
    """Parse and validate a scene document; raises SceneValidationError with
    the offending field path, or DegenerateBoxError for non-positive sizes."""
    if not isinstance(doc, dict):
        raise SceneValidationError(".", "expected a JSON object")
    cam_doc = _expect(doc, "camera", "")
    cam_path = "camera"
    fx = _number(_expect(cam_doc, "fx", cam_path), "camera.fx")
    fy = _number(_expect(cam_doc, "fy", cam_path), "camera.fy")
    cx = _number(_expect(cam_doc, "cx", cam_path), "camera.cx")
    cy = _number(_expect(cam_doc, "cy", cam_path), "camera.cy")
    width = _expect(cam_doc, "width", cam_path)
    height = _expect(cam_doc, "height", cam_path)
    if not isinstance(width, int) or isinstance(width, bool) or width < 1:
        raise SceneValidationError("camera.width", "expected a positive integer")
    if not isinstance(height, int) or isinstance(height, bool) or height < 1:
        raise SceneValidationError("camera.height", "expected a positive integer")
    if fx <= 0:
        raise SceneValidationError("camera.fx", "must be positive")
    if fy <= 0:
        raise SceneValidationError("camera.fy", "must be positive")
    camera = Camera(fx=fx, fy=fy, cx=cx, cy=cy, width=width, height=height)

    objs_doc = _expect(doc, "objects", "")
    if not isinstance(objs_doc, list):
        raise SceneValidationError("objects", "expected a list")
    objects = []
    for i, obj in enumerate(objs_doc):
        p = f"objects[{i}]"
        if not isinstance(obj, dict):
            raise SceneValidationError(p, "expected an object")
        label = obj.get("label", "")
        if not isinstance(label, str):
            raise SceneValidationError(f"{p}.label", "expected a string")
        center = _vec(_expect(obj, "center", p), 3, f"{p}.center")
        size = _vec(_expect(obj, "size", p), 3, f"{p}.size")
        for k, s in enumerate(size):
            if s <= 0:
                raise DegenerateBoxError(f"{p}.size[{k}]", "must be strictly positive")
        rot_doc = _expect(obj, "rotation", p)
        quat = _vec(_expect(rot_doc, "quat", f"{p}.rotation"), 4, f"{p}.rotation.quat")
        if all(q == 0 for q in quat):
            raise SceneValidationError(f"{p}.rotation.quat", "must be non-zero")
        objects.append(
            OrientedBox(center=np.array(center), size=np.array(size),
                        rotation=Rotation(np.array(quat)), label=label)
        )

    prompt = doc.get("prompt", "")
    if not isinstance(prompt, str):
        raise SceneValidationError("prompt", "expected a string")
    object_prompts = doc.get("object_prompts")
    if object_prompts is not None:
        if not isinstance(object_prompts, list) or not all(isinstance(s, str) for s in object_prompts):
            raise SceneValidationError("object_prompts", "expected a list of strings")
        if len(object_prompts) != len(objects):
            raise SceneValidationError("object_prompts", "must align with objects")
        object_prompts = tuple(object_prompts)

    return Scene(camera=camera, objects=tuple(objects), prompt=prompt,
                 object_prompts=object_prompts)


def scene_to_dict(scene: Scene) -> dict:
    doc: dict = {
        "camera": {
            "fx": scene.camera.fx,
            "fy": scene.camera.fy,
            "cx": scene.camera.cx,
            "cy": scene.camera.cy,
            "width": scene.camera.width,
            "height": scene.camera.height,
        },
        "objects": [
            {
                "label": b.label,
                "center": list(b.center),
                "size": list(b.size),
                "rotation": {"quat": list(b.rotation.quat)},
            }
            for b in scene.objects
        ],
        "prompt": scene.prompt,
    }
    if scene.object_prompts is not None:
        doc["object_prompts"] = list(scene.object_prompts)
    return doc


def load_scene(path) -> Scene:
    with open(path, "r", encoding="utf-8") as f:
        return scene_from_dict(json.load(f))


def dump_scene(scene: Scene, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(scene_to_dict(scene), f, indent=2)
        f.write("\n")
