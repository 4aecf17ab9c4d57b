"""Pose-fidelity reward over pluggable detection / orientation oracles.

Per object i the reward combines two discrepancy terms:

  D_ls,i = 1 - IoU(best detected 2D box for the label, projected 3D box)
  D_o,i  = KL(target azimuth distribution || estimated azimuth distribution)

and totals r_ls = sum_i (1 - D_ls,i), r_o = sum_i (1 - D_o,i),
r = gamma * r_ls + lambda * r_o.

Oracles abstract the external detector and orientation estimator; this
package ships a ground-truth pair (for fixed-point tests) and a fixture
pair (deterministic offline JSON), never the real models.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .scene import OrientedBox, Rect, Scene, project_box_to_rect

__all__ = [
    "DEFAULT_BINS",
    "DEFAULT_KAPPA",
    "Detection",
    "ObjectCrop",
    "DetectionOracle",
    "OrientationOracle",
    "PoseReward",
    "ObjectTerms",
    "iou",
    "target_distribution",
    "kl_divergence",
    "reward",
    "GroundTruthDetector",
    "GroundTruthOrientation",
    "ground_truth_oracles",
    "FixtureDetector",
    "FixtureOrientation",
    "fixture_oracles",
]

DEFAULT_BINS = 360
DEFAULT_KAPPA = 10.0
_KL_EPS = 1e-8


def iou(a: Rect | None, b: Rect | None) -> float:
    """Intersection over union of two rectangles; 0 if either is empty."""
    if a is None or b is None or a.is_empty or b.is_empty:
        return 0.0
    ix0 = max(a.x0, b.x0)
    iy0 = max(a.y0, b.y0)
    ix1 = min(a.x1, b.x1)
    iy1 = min(a.y1, b.y1)
    inter = max(0.0, ix1 - ix0) * max(0.0, iy1 - iy0)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def target_distribution(azimuth_deg: float, kappa: float = DEFAULT_KAPPA,
                        bins: int = DEFAULT_BINS) -> np.ndarray:
    """Discretized von Mises over `bins` azimuth bins centered at azimuth_deg.

    kappa = 0 gives the uniform distribution; kappa = inf a one-hot bin.
    Bin k represents k * (360 / bins) degrees.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    step = 360.0 / bins
    if math.isinf(kappa):
        out = np.zeros(bins)
        out[int(round(azimuth_deg / step)) % bins] = 1.0
        return out
    centers = np.arange(bins) * step
    logits = kappa * np.cos(np.deg2rad(centers - azimuth_deg))
    p = np.exp(logits - logits.max())
    return p / p.sum()


def _smooth(q: np.ndarray) -> np.ndarray:
    # Full-support distributions pass through untouched so KL(p, p) == 0.
    if q.min() > 0.0:
        return q
    q = q + _KL_EPS
    return q / q.sum()


def kl_divergence(target: np.ndarray, estimated: np.ndarray) -> float:
    """KL(target || estimated) with 0 log 0 = 0; the estimate is
    epsilon-smoothed when it has empty bins."""
    target = np.asarray(target, dtype=np.float64)
    estimated = _smooth(np.asarray(estimated, dtype=np.float64))
    if target.shape != estimated.shape:
        raise ValueError("distribution lengths differ")
    pos = target > 0
    return float(np.sum(target[pos] * np.log(target[pos] / estimated[pos])))


@dataclass(frozen=True)
class Detection:
    rect: Rect
    confidence: float = 1.0


@dataclass(frozen=True)
class ObjectCrop:
    """The image region handed to the orientation oracle."""

    image: object
    rect: Rect
    label: str


class DetectionOracle(Protocol):
    def __call__(self, image, label: str) -> list[Detection]: ...


class OrientationOracle(Protocol):
    def __call__(self, crop: ObjectCrop) -> np.ndarray: ...


@dataclass(frozen=True)
class ObjectTerms:
    label: str
    iou: float
    d_ls: float
    d_o: float


@dataclass(frozen=True)
class PoseReward:
    r_ls: float
    r_o: float
    r: float
    gamma: float
    lam: float
    per_object: tuple[ObjectTerms, ...]

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "r_ls": self.r_ls,
            "r_o": self.r_o,
            "gamma": self.gamma,
            "lambda": self.lam,
            "per_object": [
                {"label": t.label, "iou": t.iou, "d_ls": t.d_ls, "d_o": t.d_o}
                for t in self.per_object
            ],
        }


def reward(image, scene: Scene, det: DetectionOracle, ori: OrientationOracle,
           gamma: float = 0.0, lam: float = 1.0,
           kappa: float = DEFAULT_KAPPA, bins: int = DEFAULT_BINS) -> PoseReward:
    """Evaluate the pose reward of `image` against the scene's target poses.

    Per object, the best detection is the one with highest IoU against the
    projected box. Objects with no detection, an empty projection, or a
    partially-behind-camera projection count as failed localization
    (D_ls = 1); the projected rectangle then serves as the crop fallback.
    """
    if not scene.objects:
        raise ValueError("reward needs a non-empty scene")
    terms = []
    r_ls = 0.0
    r_o = 0.0
    for i, box in enumerate(scene.objects):
        proj = project_box_to_rect(scene.camera, box)
        detections = det(image, box.label)
        best_rect = None
        best_iou = 0.0
        for d in detections:
            v = iou(d.rect, proj.rect)
            if best_rect is None or v > best_iou:
                best_rect = d.rect
                best_iou = v
        if best_rect is None:
            d_ls = 1.0
            crop_rect = proj.rect
        elif proj.rect is None or proj.partial:
            d_ls = 1.0
            crop_rect = best_rect
        else:
            d_ls = 1.0 - best_iou
            crop_rect = best_rect
        if crop_rect is None:
            crop_rect = Rect(0.0, 0.0, 0.0, 0.0)

        target = target_distribution(math.degrees(box.rotation.azimuth), kappa, bins)
        estimated = ori(ObjectCrop(image=image, rect=crop_rect, label=box.label))
        d_o = kl_divergence(target, estimated)

        terms.append(ObjectTerms(label=box.label, iou=(0.0 if best_rect is None else best_iou),
                                 d_ls=d_ls, d_o=d_o))
        r_ls += 1.0 - d_ls
        r_o += 1.0 - d_o
    return PoseReward(r_ls=r_ls, r_o=r_o, r=gamma * r_ls + lam * r_o,
                      gamma=gamma, lam=lam, per_object=tuple(terms))


# ---------------------------------------------------------------------------
# Oracle stubs
# ---------------------------------------------------------------------------

@dataclass
class GroundTruthDetector:
    """Returns the projected rectangle of every scene box with the label."""

    scene: Scene

    def __call__(self, image, label: str) -> list[Detection]:
        out = []
        for box in self.scene.objects:
            if box.label != label:
                continue
            proj = project_box_to_rect(self.scene.camera, box)
            if proj.rect is not None and not proj.partial:
                out.append(Detection(rect=proj.rect, confidence=1.0))
        return out


@dataclass
class GroundTruthOrientation:
    """Returns the target distribution of the scene box whose projection
    best matches the crop rectangle."""

    scene: Scene
    kappa: float = DEFAULT_KAPPA
    bins: int = DEFAULT_BINS

    def __call__(self, crop: ObjectCrop) -> np.ndarray:
        best_box = None
        best_v = -1.0
        for box in self.scene.objects:
            if crop.label and box.label != crop.label:
                continue
            proj = project_box_to_rect(self.scene.camera, box)
            v = iou(proj.rect, crop.rect)
            if v > best_v:
                best_v = v
                best_box = box
        if best_box is None:
            return np.full(self.bins, 1.0 / self.bins)
        azimuth = math.degrees(best_box.rotation.azimuth)
        return target_distribution(azimuth, self.kappa, self.bins)


def ground_truth_oracles(scene: Scene, kappa: float = DEFAULT_KAPPA,
                         bins: int = DEFAULT_BINS):
    return GroundTruthDetector(scene), GroundTruthOrientation(scene, kappa, bins)


# Fixture files map (case id, label) -> detections and azimuth distributions:
# {"cases": {case_id: {label: {"detections": [{"rect": [x0,y0,x1,y1],
#                                              "confidence": 0.9}, ...],
#                              "distribution": [p_0, ..., p_{B-1}]}}}}


class UnknownFixtureError(KeyError):
    pass


def _load_fixture(path, case_id: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except FileNotFoundError:
        raise UnknownFixtureError(f"fixture file not found: {path}") from None
    cases = doc.get("cases", {})
    if case_id not in cases:
        raise UnknownFixtureError(f"case {case_id!r} not in fixture {path}")
    return cases[case_id]


@dataclass
class FixtureDetector:
    entries: dict

    def __call__(self, image, label: str) -> list[Detection]:
        entry = self.entries.get(label)
        if not entry:
            return []
        return [
            Detection(rect=Rect(*d["rect"]), confidence=d.get("confidence", 1.0))
            for d in entry.get("detections", [])
        ]


@dataclass
class FixtureOrientation:
    entries: dict
    bins: int = DEFAULT_BINS

    def __call__(self, crop: ObjectCrop) -> np.ndarray:
        entry = self.entries.get(crop.label)
        if entry and "distribution" in entry:
            dist = np.asarray(entry["distribution"], dtype=np.float64)
            return dist / dist.sum()
        return np.full(self.bins, 1.0 / self.bins)


def fixture_oracles(path, case_id: str, bins: int = DEFAULT_BINS):
    entries = _load_fixture(path, case_id)
    return FixtureDetector(entries), FixtureOrientation(entries, bins)
