import numpy as np
import pytest

from cnocs import Camera, OrientedBox, Rotation, Scene


def random_rotation(rng) -> Rotation:
    return Rotation(rng.standard_normal(4))


def random_box(rng, label="", z_range=(3.0, 9.0), size_range=(0.3, 1.5),
               camera: Camera | None = None) -> OrientedBox:
    """A box in front of the camera, roughly inside the frustum, with every
    corner well past z = 0 (so projections are never partial)."""
    cam = camera or Camera(fx=256, fy=256, cx=128, cy=128, width=256, height=256)
    z = rng.uniform(*z_range)
    u = rng.uniform(0.2, 0.8) * cam.width
    v = rng.uniform(0.2, 0.8) * cam.height
    center = np.array([(u - cam.cx) / cam.fx * z, (v - cam.cy) / cam.fy * z, z])
    size = rng.uniform(*size_range, size=3)
    return OrientedBox(center=center, size=size, rotation=random_rotation(rng), label=label)


def random_scene(rng, n_boxes: int | None = None, width=256, height=256,
                 max_boxes=8, prompt="a scene") -> Scene:
    cam = Camera(fx=float(width), fy=float(height), cx=width / 2.0, cy=height / 2.0,
                 width=width, height=height)
    if n_boxes is None:
        n_boxes = int(rng.integers(1, max_boxes + 1))
    boxes = tuple(random_box(rng, label=f"object{i}", camera=cam) for i in range(n_boxes))
    return Scene(camera=cam, objects=boxes, prompt=prompt)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


@pytest.fixture(scope="session")
def warm_kernel():
    """Trigger JIT compilation once so timed tests measure steady state."""
    from cnocs import render_cnocs, EncodingSpec

    cam = Camera(fx=16, fy=16, cx=8, cy=8, width=16, height=16)
    box = OrientedBox(center=(0, 0, 5), size=(1, 1, 1), label="warm")
    render_cnocs(Scene(camera=cam, objects=(box,)), EncodingSpec())
