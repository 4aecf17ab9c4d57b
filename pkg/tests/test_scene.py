import json
import math

import numpy as np
import pytest

from cnocs import (
    Camera,
    OrientedBox,
    Rotation,
    Scene,
    compose,
    project_box_to_rect,
    project_point,
    transform_c2o,
    transform_o2c,
)
from cnocs.scene import (
    DegenerateBoxError,
    SceneValidationError,
    dump_scene,
    load_scene,
    scene_from_dict,
    scene_to_dict,
)
from conftest import random_box, random_rotation, random_scene

CAM = Camera(fx=100.0, fy=100.0, cx=50.0, cy=50.0, width=100, height=100)


class TestProjectPoint:
    def test_principal_axis(self):
        assert project_point(CAM, (0, 0, 1)) == (50.0, 50.0)

    def test_similar_triangles(self):
        assert project_point(CAM, (0.5, 0, 1)) == (100.0, 50.0)

    def test_behind_camera(self):
        assert project_point(CAM, (0, 0, -1)) is None
        assert project_point(CAM, (1, 1, 0)) is None


class TestProjectBoxToRect:
    def test_unit_cube_hull_matches_corner_projection(self):
        box = OrientedBox(center=(0, 0, 5), size=(1, 1, 1))
        proj = project_box_to_rect(CAM, box)
        assert not proj.partial
        # hand-projected hull: front corners at z = 4.5 dominate
        pts = [project_point(CAM, c) for c in box.corners()]
        us = [p[0] for p in pts]
        vs = [p[1] for p in pts]
        assert proj.rect.x0 == pytest.approx(min(us), abs=1e-12)
        assert proj.rect.x1 == pytest.approx(max(us), abs=1e-12)
        assert proj.rect.y0 == pytest.approx(min(vs), abs=1e-12)
        assert proj.rect.y1 == pytest.approx(max(vs), abs=1e-12)
        assert proj.rect.x0 == pytest.approx(50.0 - 100.0 * 0.5 / 4.5)
        assert proj.rect.x1 == pytest.approx(50.0 + 100.0 * 0.5 / 4.5)

    def test_fully_behind_camera(self):
        box = OrientedBox(center=(0, 0, -5), size=(1, 1, 1))
        proj = project_box_to_rect(CAM, box)
        assert proj.rect is None
        assert not proj.partial

    def test_degenerate_box_collapses_to_principal_point(self):
        box = OrientedBox(center=(0, 0, 5), size=(1e-9, 1e-9, 1e-9))
        proj = project_box_to_rect(CAM, box)
        assert proj.rect.x0 == pytest.approx(50.0, abs=1e-6)
        assert proj.rect.x1 == pytest.approx(50.0, abs=1e-6)
        assert proj.rect.y0 == pytest.approx(50.0, abs=1e-6)

    def test_straddling_box_sets_partial_flag(self):
        box = OrientedBox(center=(0, 0, 0.4), size=(1, 1, 2))
        proj = project_box_to_rect(CAM, box)
        assert proj.partial

    def test_offscreen_hull_is_empty(self):
        box = OrientedBox(center=(100, 0, 5), size=(1, 1, 1))
        proj = project_box_to_rect(CAM, box)
        assert proj.rect is None

    def test_hull_invariant_under_corner_permuting_yaw(self, rng):
        # a 90-degree yaw of a cube maps the corner set onto itself
        for _ in range(10):
            box = random_box(rng, camera=CAM)
            cube = OrientedBox(center=box.center, size=(0.8, 0.8, 0.8),
                               rotation=box.rotation)
            yawed = OrientedBox(
                center=cube.center, size=cube.size,
                rotation=compose(cube.rotation,
                                 Rotation.from_axis_angle((0, 1, 0), math.pi / 2)),
            )
            a = project_box_to_rect(CAM, cube).rect
            b = project_box_to_rect(CAM, yawed).rect
            assert a.as_list() == pytest.approx(b.as_list(), abs=1e-9)


class TestRotation:
    def test_quaternion_normalized(self, rng):
        for _ in range(50):
            q = Rotation(rng.standard_normal(4) * 3.0)
            assert abs(np.linalg.norm(q.quat) - 1.0) < 1e-9

    def test_matrix_orthonormal(self, rng):
        for _ in range(50):
            m = random_rotation(rng).matrix()
            assert np.abs(m @ m.T - np.eye(3)).max() < 1e-9
            assert abs(np.linalg.det(m) - 1.0) < 1e-9

    def test_matrix_round_trip(self, rng):
        for _ in range(50):
            r = random_rotation(rng)
            r2 = Rotation.from_matrix(r.matrix())
            assert np.abs(r.matrix() - r2.matrix()).max() < 1e-9

    def test_euler_round_trip(self, rng):
        for _ in range(200):
            az = rng.uniform(-math.pi, math.pi)
            el = rng.uniform(-math.pi / 2 + 2e-3, math.pi / 2 - 2e-3)
            roll = rng.uniform(-math.pi, math.pi)
            got = Rotation.from_euler(az, el, roll).euler()
            assert got == pytest.approx((az, el, roll), abs=1e-9)

    def test_compose_is_quaternion_product(self, rng):
        for _ in range(20):
            a, b = random_rotation(rng), random_rotation(rng)
            v = rng.standard_normal(3)
            assert compose(a, b).apply(v) == pytest.approx(a.apply(b.apply(v)), abs=1e-12)

    def test_azimuth_about_camera_up(self):
        # quarter turn about camera-up (-y): forward +z swings to -x
        # (counterclockwise seen from above)
        r = Rotation.from_euler(math.pi / 2, 0.0, 0.0)
        assert r.apply((0, 0, 1)) == pytest.approx((-1, 0, 0), abs=1e-12)


class TestTransforms:
    def test_identity_rotation_subtracts_center(self):
        box = OrientedBox(center=(1, 2, 3), size=(1, 1, 1))
        assert transform_c2o(box, (2, 2, 3)) == pytest.approx([1, 0, 0])

    def test_center_maps_to_origin(self, rng):
        box = random_box(rng)
        assert transform_c2o(box, box.center) == pytest.approx([0, 0, 0], abs=1e-12)

    def test_round_trip(self, rng):
        for _ in range(100):
            box = random_box(rng)
            p = rng.standard_normal(3) * 5
            q = transform_c2o(box, p)
            assert transform_o2c(box, q) == pytest.approx(p, abs=1e-12)

    def test_corners_match_definition(self, rng):
        box = random_box(rng)
        r = box.rotation.matrix()
        half = box.size / 2
        expected = {
            tuple(np.round(box.center + r @ (np.array([sx, sy, sz]) * half), 9))
            for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)
        }
        got = {tuple(np.round(c, 9)) for c in box.corners()}
        assert got == expected


class TestSceneValidation:
    def test_size_must_be_positive(self):
        with pytest.raises(ValueError):
            OrientedBox(center=(0, 0, 5), size=(1, 0, 1))

    def test_camera_invariants(self):
        with pytest.raises(ValueError):
            Camera(fx=-1, fy=1, cx=0, cy=0, width=10, height=10)
        with pytest.raises(ValueError):
            Camera(fx=1, fy=1, cx=0, cy=0, width=0, height=10)

    def test_object_prompts_alignment(self):
        box = OrientedBox(center=(0, 0, 5), size=(1, 1, 1))
        with pytest.raises(ValueError):
            Scene(camera=CAM, objects=(box,), object_prompts=("a", "b"))

    def test_missing_field_paths(self):
        doc = scene_to_dict(Scene(camera=CAM))
        del doc["camera"]["fx"]
        with pytest.raises(SceneValidationError) as err:
            scene_from_dict(doc)
        assert err.value.path == "camera.fx"

    def test_bad_vector_path(self, rng):
        doc = scene_to_dict(random_scene(rng, n_boxes=2))
        doc["objects"][1]["center"] = [0, "x", 0]
        with pytest.raises(SceneValidationError) as err:
            scene_from_dict(doc)
        assert err.value.path == "objects[1].center[1]"

    def test_degenerate_size_is_its_own_error(self, rng):
        doc = scene_to_dict(random_scene(rng, n_boxes=1))
        doc["objects"][0]["size"][2] = -1.0
        with pytest.raises(DegenerateBoxError) as err:
            scene_from_dict(doc)
        assert err.value.path == "objects[0].size[2]"


class TestSceneSerialization:
    def test_round_trip_bit_exact(self, rng):
        for _ in range(20):
            scene = random_scene(rng)
            doc = scene_to_dict(scene)
            back = scene_from_dict(json.loads(json.dumps(doc)))
            assert back.camera == scene.camera
            assert back.prompt == scene.prompt
            for a, b in zip(back.objects, scene.objects):
                assert np.array_equal(a.center, b.center)
                assert np.array_equal(a.size, b.size)
                assert np.array_equal(a.rotation.quat, b.rotation.quat)
                assert a.label == b.label

    def test_document_round_trip_is_stable(self, rng):
        scene = random_scene(rng, n_boxes=3)
        doc = scene_to_dict(scene)
        doc2 = scene_to_dict(scene_from_dict(doc))
        assert json.dumps(doc, sort_keys=True) == json.dumps(doc2, sort_keys=True)

    def test_file_round_trip(self, rng, tmp_path):
        scene = random_scene(rng, n_boxes=2)
        path = tmp_path / "scene.json"
        dump_scene(scene, path)
        back = load_scene(path)
        assert scene_to_dict(back) == scene_to_dict(scene)

    def test_object_prompts_survive(self):
        box = OrientedBox(center=(0, 0, 5), size=(1, 1, 1), label="chair")
        scene = Scene(camera=CAM, objects=(box,), prompt="p", object_prompts=("a red chair",))
        back = scene_from_dict(scene_to_dict(scene))
        assert back.object_prompts == ("a red chair",)
        assert back.prompt_for(0) == "a red chair"
        assert Scene(camera=CAM, objects=(box,)).prompt_for(0) == "chair"
