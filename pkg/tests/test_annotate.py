import json
import math

import numpy as np
import pytest

from cnocs import OrientedBox, Rotation, compose
from cnocs.annotate import (
    AnnotationCandidate,
    PointCloud,
    RejectReason,
    annotate,
    filter_candidates,
    fit_obb,
    load_candidates,
    trim_points,
    trim_points_by_distance,
)
from conftest import random_box, random_rotation
from oracles import trim_oracle


def candidate(rng, label="chair", area=0.3, confidence=0.95, points=None):
    if points is None:
        points = rng.standard_normal((20, 3))
    return AnnotationCandidate(candidate_id="c", label=label, area_fraction=area,
                               confidence=confidence, orientation=random_rotation(rng),
                               points=PointCloud(points))


class TestFilterCandidates:
    @pytest.mark.parametrize("area,conf,label,reason", [
        (0.05, 0.95, "chair", RejectReason.TOO_SMALL),
        (0.75, 0.95, "chair", RejectReason.TOO_LARGE),
        (0.30, 0.79, "chair", RejectReason.LOW_CONFIDENCE),
        (0.30, 0.95, "bottle", RejectReason.AMBIGUOUS_CATEGORY),
    ])
    def test_rejections(self, rng, area, conf, label, reason):
        accepted, rejected = filter_candidates([candidate(rng, label, area, conf)])
        assert accepted == []
        assert rejected[0][1] is reason

    def test_acceptance(self, rng):
        accepted, rejected = filter_candidates([candidate(rng, "chair", 0.3, 0.95)])
        assert len(accepted) == 1 and rejected == []

    def test_boundaries_inclusive(self, rng):
        cands = [candidate(rng, area=0.10), candidate(rng, area=0.70),
                 candidate(rng, confidence=0.8)]
        accepted, rejected = filter_candidates(cands)
        assert len(accepted) == 3

    def test_custom_ambiguous_list(self, rng):
        cand = candidate(rng, label="cup")
        _, rejected = filter_candidates([cand], ambiguous_labels={"cup"})
        assert rejected[0][1] is RejectReason.AMBIGUOUS_CATEGORY


class TestTrimPoints:
    def test_far_outlier_removed(self):
        pts = np.zeros((10, 3))
        pts[:, 0] = np.arange(10) * 0.01
        pts[7] = [50.0, 0, 0]
        trimmed = trim_points(PointCloud(pts), 0.10)
        assert len(trimmed) == 9
        assert not (trimmed.points == [50.0, 0, 0]).all(axis=1).any()

    def test_zero_fraction_is_identity(self, rng):
        pts = rng.standard_normal((15, 3))
        trimmed = trim_points(PointCloud(pts), 0.0)
        assert np.array_equal(trimmed.points, pts)

    def test_keeps_input_order(self, rng):
        pts = rng.standard_normal((40, 3))
        trimmed = trim_points(PointCloud(pts), 0.2)
        # survivors appear in the same relative order as the input
        idx = [np.flatnonzero((pts == p).all(axis=1))[0] for p in trimmed.points]
        assert idx == sorted(idx)

    def test_matches_sort_oracle_on_uniform_ball(self, rng):
        u = rng.standard_normal((1000, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        radii = rng.random(1000) ** (1 / 3)
        pts = u * radii[:, None]
        trimmed = trim_points(PointCloud(pts), 0.10)
        assert np.array_equal(trimmed.points, trim_oracle(pts, 0.10))
        # retained max radius sits near the 0.9 quantile radius 0.9^(1/3)
        centroid = pts.mean(axis=0)
        kept_r = np.linalg.norm(trimmed.points - centroid, axis=1).max()
        assert kept_r == pytest.approx(0.9 ** (1 / 3), abs=0.05)

    def test_matches_sort_oracle_random(self, rng):
        for _ in range(20):
            pts = rng.standard_normal((int(rng.integers(5, 60)), 3))
            frac = float(rng.uniform(0, 0.5))
            got = trim_points(PointCloud(pts), frac)
            assert np.array_equal(got.points, trim_oracle(pts, frac))

    def test_too_few_points(self, rng):
        with pytest.raises(ValueError):
            trim_points(PointCloud(rng.standard_normal((3, 3))), 0.1)

    def test_absolute_distance_mode(self):
        pts = np.zeros((8, 3))
        pts[:, 0] = [0.0, 0.1, 0.2, 0.3, 0.1, 0.2, 9.0, 12.0]
        kept = trim_points_by_distance(PointCloud(pts), 5.0)
        assert len(kept) == 6
        assert kept.points[:, 0].max() < 1.0
        with pytest.raises(ValueError):
            trim_points_by_distance(PointCloud(pts), 1e-9)
        with pytest.raises(ValueError):
            trim_points_by_distance(PointCloud(pts), -1.0)


class TestFitObb:
    def test_recovers_synthesized_box(self, rng):
        for _ in range(100):
            box = random_box(rng)
            fit = fit_obb(PointCloud(box.corners()), box.rotation, label=box.label)
            assert not fit.degenerate
            assert np.abs(fit.box.center - box.center).max() < 1e-9
            assert np.abs(fit.box.size - box.size).max() < 1e-9
            assert np.array_equal(fit.box.rotation.quat, box.rotation.quat)

    def test_axis_aligned_unit_cube(self):
        box = OrientedBox(center=(1, 2, 3), size=(1, 1, 1))
        fit = fit_obb(PointCloud(box.corners()), Rotation.identity())
        assert fit.box.center == pytest.approx([1, 2, 3], abs=1e-12)
        assert fit.box.size == pytest.approx([1, 1, 1], abs=1e-12)

    def test_interior_points_do_not_change_fit(self, rng):
        box = random_box(rng)
        corners = box.corners()
        interior = box.center + (rng.uniform(-0.4, 0.4, (50, 3)) * box.size) @ box.rotation.matrix().T
        a = fit_obb(PointCloud(corners), box.rotation)
        b = fit_obb(PointCloud(np.vstack([corners, interior])), box.rotation)
        assert np.abs(a.box.center - b.box.center).max() < 1e-12
        assert np.abs(a.box.size - b.box.size).max() < 1e-12

    def test_containment(self, rng):
        for _ in range(20):
            pts = rng.standard_normal((30, 3)) * rng.uniform(0.1, 3.0)
            rot = random_rotation(rng)
            fit = fit_obb(PointCloud(pts), rot)
            q = (pts - fit.box.center) @ rot.matrix()
            assert np.all(np.abs(q) <= fit.box.size / 2 + 1e-9)

    def test_tightness(self, rng):
        pts = rng.standard_normal((30, 3))
        rot = random_rotation(rng)
        fit = fit_obb(PointCloud(pts), rot)
        q = np.abs((pts - fit.box.center) @ rot.matrix())
        for axis in range(3):
            shrunk = fit.box.size[axis] / 2 - 1e-3 / 2
            assert (q[:, axis] > shrunk).any()

    def test_equivariance(self, rng):
        pts = rng.standard_normal((25, 3))
        rot = random_rotation(rng)
        base = fit_obb(PointCloud(pts), rot)
        r0 = random_rotation(rng)
        t0 = rng.standard_normal(3) * 3
        moved = fit_obb(PointCloud(pts @ r0.matrix().T + t0), compose(r0, rot))
        assert np.abs(moved.box.center - (r0.apply(base.box.center) + t0)).max() < 1e-9
        assert np.abs(moved.box.size - base.box.size).max() < 1e-9

    def test_degenerate_span_floored_and_flagged(self, rng):
        pts = np.zeros((6, 3))
        pts[:, 0] = np.linspace(0, 1, 6)  # collinear: y and z spans are zero
        fit = fit_obb(PointCloud(pts), Rotation.identity())
        assert fit.degenerate
        assert fit.box.size[1] == 1e-6 and fit.box.size[2] == 1e-6
        assert fit.box.size[0] == pytest.approx(1.0)


class TestAnnotatePipeline:
    def test_composition(self, rng):
        box = random_box(rng)
        corners = box.corners()
        outlier = box.center + np.array([40.0, 0, 0])
        pts = np.vstack([corners, corners, outlier])  # 17 points, ceil(1.7) = 2 dropped
        good = AnnotationCandidate(candidate_id="good", label="chair", area_fraction=0.3,
                                   confidence=0.9, orientation=box.rotation,
                                   points=PointCloud(pts))
        bad = AnnotationCandidate(candidate_id="tiny", label="chair", area_fraction=0.01,
                                  confidence=0.9, orientation=box.rotation,
                                  points=PointCloud(corners))
        fits, rejects = annotate([good, bad])
        assert len(fits) == 1 and len(rejects) == 1
        assert rejects[0][0].candidate_id == "tiny"
        fit, cand = fits[0]
        # outlier trimmed away, so the original box comes back
        assert np.abs(fit.box.center - box.center).max() < 1e-9
        assert np.abs(fit.box.size - box.size).max() < 1e-9

    def test_too_few_points_rejected_in_pipeline(self, rng):
        cand = AnnotationCandidate(candidate_id="few", label="chair", area_fraction=0.3,
                                   confidence=0.9, orientation=random_rotation(rng),
                                   points=PointCloud(np.zeros((2, 3))))
        fits, rejects = annotate([cand])
        assert fits == []
        assert rejects[0][1] is RejectReason.TOO_FEW_POINTS


class TestLoadCandidates:
    def test_jsonl_round_trip(self, rng, tmp_path):
        box = random_box(rng)
        doc = {
            "id": "x1",
            "label": "chair",
            "area": 0.25,
            "confidence": 0.9,
            "orientation": {"quat": list(box.rotation.quat)},
            "points": [list(p) for p in box.corners()],
        }
        path = tmp_path / "cands.jsonl"
        path.write_text(json.dumps(doc) + "\n\n")
        cands = load_candidates(path)
        assert len(cands) == 1
        assert cands[0].candidate_id == "x1"
        assert len(cands[0].points) == 8

    def test_bad_record(self, tmp_path):
        path = tmp_path / "cands.jsonl"
        path.write_text(json.dumps({"label": "chair"}) + "\n")
        with pytest.raises(ValueError):
            load_candidates(path)
