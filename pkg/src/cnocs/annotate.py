"""Pose annotation from point clouds: candidate filtering, centroid-distance
trimming, and oriented-bounding-box fitting for a given orientation.

Orientation is always an input (supplied by fixtures or an upstream
estimator); nothing here estimates it.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .scene import OrientedBox, Rotation

__all__ = [
    "MIN_AREA_FRACTION",
    "MAX_AREA_FRACTION",
    "MIN_CONFIDENCE",
    "DEFAULT_AMBIGUOUS_LABELS",
    "RejectReason",
    "PointCloud",
    "AnnotationCandidate",
    "ObbFit",
    "filter_candidates",
    "trim_points",
    "trim_points_by_distance",
    "fit_obb",
    "annotate",
    "load_candidates",
]

MIN_AREA_FRACTION = 0.10
MAX_AREA_FRACTION = 0.70
MIN_CONFIDENCE = 0.8
DEFAULT_AMBIGUOUS_LABELS = frozenset({"bottle"})

MIN_FIT_POINTS = 4
DEGENERATE_SPAN = 1e-9
SIZE_FLOOR = 1e-6


class RejectReason(enum.Enum):
    TOO_SMALL = "TOO_SMALL"
    TOO_LARGE = "TOO_LARGE"
    LOW_CONFIDENCE = "LOW_CONFIDENCE"
    AMBIGUOUS_CATEGORY = "AMBIGUOUS_CATEGORY"
    TOO_FEW_POINTS = "TOO_FEW_POINTS"


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # (n, 3) camera-space meters

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(p)):
            raise ValueError("point cloud must be finite")
        object.__setattr__(self, "points", p)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class AnnotationCandidate:
    candidate_id: str
    label: str
    area_fraction: float
    confidence: float
    orientation: Rotation
    points: PointCloud

    def __post_init__(self):
        if not (0.0 <= self.area_fraction <= 1.0):
            raise ValueError("area fraction must lie in [0, 1]")


def filter_candidates(candidates, ambiguous_labels=DEFAULT_AMBIGUOUS_LABELS):
    """Split candidates into accepted ones and (candidate, reason) rejects."""
    accepted = []
    rejected = []
    for cand in candidates:
        if cand.area_fraction < MIN_AREA_FRACTION:
            rejected.append((cand, RejectReason.TOO_SMALL))
        elif cand.area_fraction > MAX_AREA_FRACTION:
            rejected.append((cand, RejectReason.TOO_LARGE))
        elif cand.confidence < MIN_CONFIDENCE:
            rejected.append((cand, RejectReason.LOW_CONFIDENCE))
        elif cand.label in ambiguous_labels:
            rejected.append((cand, RejectReason.AMBIGUOUS_CATEGORY))
        else:
            accepted.append(cand)
    return accepted, rejected


def trim_points(points: PointCloud, fraction: float = 0.10) -> PointCloud:
    """Drop the ceil(fraction * n) points farthest from the centroid,
    keeping input order among survivors. Distance ties drop the
    later-indexed point first."""
    if not (0.0 <= fraction < 1.0):
        raise ValueError("fraction must lie in [0, 1)")
    n = len(points)
    if n < MIN_FIT_POINTS:
        raise ValueError(f"need at least {MIN_FIT_POINTS} points")
    drop = math.ceil(fraction * n)
    if drop == 0:
        return points
    centroid = points.points.mean(axis=0)
    dist = np.linalg.norm(points.points - centroid, axis=1)
    order = np.argsort(dist, kind="stable")
    keep = np.sort(order[: n - drop])
    return PointCloud(points.points[keep])


def trim_points_by_distance(points: PointCloud, max_distance: float) -> PointCloud:
    """Alternative trim mode: drop points beyond an absolute centroid
    distance instead of a percentile rank."""
    if max_distance <= 0:
        raise ValueError("max_distance must be positive")
    if len(points) < MIN_FIT_POINTS:
        raise ValueError(f"need at least {MIN_FIT_POINTS} points")
    centroid = points.points.mean(axis=0)
    dist = np.linalg.norm(points.points - centroid, axis=1)
    kept = points.points[dist <= max_distance]
    if len(kept) < MIN_FIT_POINTS:
        raise ValueError("distance threshold keeps too few points")
    return PointCloud(kept)


@dataclass(frozen=True)
class ObbFit:
    box: OrientedBox
    degenerate: bool


def fit_obb(points: PointCloud, orientation: Rotation, label: str = "") -> ObbFit:
    """Tightest box of the given orientation enclosing the points.

    Points are taken into the orientation frame, the per-axis extents give
    size and object-frame center, and the center maps back to camera space.
    Axes spanning less than 1e-9 are floored at 1e-6 and flagged.
    """
    if len(points) < MIN_FIT_POINTS:
        raise ValueError(f"need at least {MIN_FIT_POINTS} points")
    r = orientation.matrix()
    q = points.points @ r  # R^T p for every point
    lo = q.min(axis=0)
    hi = q.max(axis=0)
    span = hi - lo
    degenerate = bool(np.any(span < DEGENERATE_SPAN))
    size = np.maximum(span, SIZE_FLOOR)
    center_obj = (lo + hi) / 2.0
    center_cam = r @ center_obj
    return ObbFit(
        box=OrientedBox(center=center_cam, size=size, rotation=orientation, label=label),
        degenerate=degenerate,
    )


def annotate(candidates, trim_fraction: float = 0.10, trim_distance: float | None = None,
             ambiguous_labels=DEFAULT_AMBIGUOUS_LABELS):
    """filter -> trim -> fit per survivor.

    Trimming is percentile-rank by default; pass `trim_distance` to use the
    absolute-threshold mode instead. Returns (fits, rejects): fits as
    (ObbFit, candidate) pairs in input order, rejects as
    (candidate, RejectReason) pairs.
    """
    accepted, rejected = filter_candidates(candidates, ambiguous_labels)
    fits = []
    for cand in accepted:
        if len(cand.points) < MIN_FIT_POINTS:
            rejected.append((cand, RejectReason.TOO_FEW_POINTS))
            continue
        if trim_distance is not None:
            trimmed = trim_points_by_distance(cand.points, trim_distance)
        else:
            trimmed = trim_points(cand.points, trim_fraction)
        fits.append((fit_obb(trimmed, cand.orientation, cand.label), cand))
    return fits, rejected


def load_candidates(path) -> list[AnnotationCandidate]:
    """Read JSON-lines candidates: {label, area, confidence,
    orientation: {quat: [w,x,y,z]}, points: [[x,y,z], ...], id?}."""
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            try:
                out.append(
                    AnnotationCandidate(
                        candidate_id=str(doc.get("id", line_no - 1)),
                        label=doc["label"],
                        area_fraction=float(doc["area"]),
                        confidence=float(doc["confidence"]),
                        orientation=Rotation(np.asarray(doc["orientation"]["quat"], dtype=np.float64)),
                        points=PointCloud(np.asarray(doc["points"], dtype=np.float64)),
                    )
                )
            except (KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no}: bad candidate record ({exc})") from None
    return out
