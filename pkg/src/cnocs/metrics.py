"""Validation metrics: spatial accuracy, mean IoU, and azimuth error.

  Acc_ls    fraction of cases with IoU strictly above 0.6
  mIoU      mean IoU
  Abs.Err   mean circular azimuth error, degrees
  Acc@22.5  fraction of cases with circular azimuth error <= 22.5 degrees
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .reward import iou as rect_iou
from .scene import Rect

__all__ = ["EvalCase", "MetricSummary", "circular_error_deg", "eval_metrics", "load_cases"]

ACC_LS_IOU_THRESHOLD = 0.6
AZIMUTH_TOLERANCE_DEG = 22.5


@dataclass(frozen=True)
class EvalCase:
    """One evaluated object instance.

    Either supply `iou` directly or the ground-truth and detected
    rectangles it should be computed from.
    """

    target_azimuth_deg: float
    estimated_azimuth_deg: float
    iou: float | None = None
    gt_rect: Rect | None = None
    det_rect: Rect | None = None

    def resolved_iou(self) -> float:
        if self.iou is not None:
            return self.iou
        return rect_iou(self.gt_rect, self.det_rect)


@dataclass(frozen=True)
class MetricSummary:
    acc_ls: float
    miou: float
    abs_err: float
    acc_at_22_5: float

    def to_dict(self) -> dict:
        return {
            "acc_ls": self.acc_ls,
            "miou": self.miou,
            "abs_err": self.abs_err,
            "acc_at_22_5": self.acc_at_22_5,
        }


def circular_error_deg(a: float, b: float) -> float:
    """Shortest angular distance between two azimuths, in [0, 180]."""
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def eval_metrics(cases: list[EvalCase]) -> MetricSummary:
    if not cases:
        raise ValueError("eval_metrics needs at least one case")
    n = len(cases)
    ious = [c.resolved_iou() for c in cases]
    errs = [circular_error_deg(c.target_azimuth_deg, c.estimated_azimuth_deg) for c in cases]
    # fsum keeps the means exactly permutation-invariant
    return MetricSummary(
        acc_ls=sum(1 for v in ious if v > ACC_LS_IOU_THRESHOLD) / n,
        miou=math.fsum(ious) / n,
        abs_err=math.fsum(errs) / n,
        acc_at_22_5=sum(1 for e in errs if e <= AZIMUTH_TOLERANCE_DEG) / n,
    )


def load_cases(path) -> list[EvalCase]:
    """Read JSON-lines cases: {"target_azimuth": deg, "estimated_azimuth": deg,
    then either "iou" or "gt_rect"/"det_rect" as [x0, y0, x1, y1]}."""
    cases = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            try:
                cases.append(
                    EvalCase(
                        target_azimuth_deg=float(doc["target_azimuth"]),
                        estimated_azimuth_deg=float(doc["estimated_azimuth"]),
                        iou=(float(doc["iou"]) if "iou" in doc else None),
                        gt_rect=(Rect(*doc["gt_rect"]) if "gt_rect" in doc else None),
                        det_rect=(Rect(*doc["det_rect"]) if "det_rect" in doc else None),
                    )
                )
            except (KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no}: bad case record ({exc})") from None
    return cases
