"""Sampling-run manifests: parse, build the per-object conditioning, execute.

A manifest is JSON:

    {
      "scene": {...}               inline scene document, or
      "scene_file": "path.json"    a path to one,
      "encoding": {"variant": "identity", "degree": 2, "include_radius": false},
      "T": 20,
      "injection_steps": 15,
      "field": {"name": "zero" | "linear_to_target" | "seeded_random", ...},
      "seed": 0,
      "latent_channels": 4,
      "latent_downsample": 8
    }

`linear_to_target` takes {"targets": {prompt: image-or-container path}}.
Execution renders the global map and one map per object, derives latent-
resolution masks from the per-object maps, integrates the field, and packs
the resulting latent into a CNOC container plus a PNG preview.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .container import array_to_bytes, bytes_to_container, preview_png
from .flow import DosConfig, make_field, dos_sample
from .render import EncodingSpec, downsample_mask, object_mask, render_cnocs
from .scene import Scene, load_scene, scene_from_dict

__all__ = ["RunManifest", "RunResult", "parse_manifest", "execute_run"]

DEFAULT_STEPS = 20
DEFAULT_INJECTION_STEPS = 15
DEFAULT_LATENT_CHANNELS = 4
DEFAULT_LATENT_DOWNSAMPLE = 8


class ManifestError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class RunManifest:
    scene: Scene
    encoding: EncodingSpec
    steps: int
    injection_steps: int
    field_spec: dict
    seed: int
    latent_channels: int
    latent_downsample: int


def _positive_int(doc: dict, key: str, default: int) -> int:
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ManifestError(key, "expected a positive integer")
    return value


def parse_manifest(doc: dict, base_dir=None) -> RunManifest:
    if not isinstance(doc, dict):
        raise ManifestError(".", "expected a JSON object")
    base = Path(base_dir) if base_dir is not None else Path(".")

    if "scene" in doc:
        scene = scene_from_dict(doc["scene"])
    elif "scene_file" in doc:
        try:
            scene = load_scene(base / doc["scene_file"])
        except FileNotFoundError:
            raise ManifestError("scene_file", "file not found") from None
    else:
        raise ManifestError("scene", "manifest needs `scene` or `scene_file`")

    enc_doc = doc.get("encoding", {})
    if not isinstance(enc_doc, dict):
        raise ManifestError("encoding", "expected an object")
    try:
        encoding = EncodingSpec.parse(
            enc_doc.get("variant", "identity"),
            degree=enc_doc.get("degree", 2),
            include_radius=bool(enc_doc.get("include_radius", False)),
        )
    except ValueError as exc:
        raise ManifestError("encoding.variant", str(exc)) from None

    steps = _positive_int(doc, "T", DEFAULT_STEPS)
    injection = doc.get("injection_steps", min(DEFAULT_INJECTION_STEPS, steps))
    if isinstance(injection, bool) or not isinstance(injection, int) or injection < 0:
        raise ManifestError("injection_steps", "expected a non-negative integer")
    if injection > steps:
        raise ManifestError("injection_steps", "must not exceed T")

    field_spec = doc.get("field", {"name": "zero"})
    if isinstance(field_spec, str):
        field_spec = {"name": field_spec}
    if not isinstance(field_spec, dict) or "name" not in field_spec:
        raise ManifestError("field", "expected a field name or {name: ...}")

    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ManifestError("seed", "expected an integer")

    channels = _positive_int(doc, "latent_channels", DEFAULT_LATENT_CHANNELS)
    factor = _positive_int(doc, "latent_downsample", DEFAULT_LATENT_DOWNSAMPLE)
    if scene.camera.width % factor or scene.camera.height % factor:
        raise ManifestError("latent_downsample", "must divide the image resolution")

    return RunManifest(scene=scene, encoding=encoding, steps=steps,
                       injection_steps=injection, field_spec=field_spec,
                       seed=seed, latent_channels=channels, latent_downsample=factor)


def _load_target(path: Path, shape: tuple) -> np.ndarray:
    """Load a target image as a (C, h, w) array in [-1, 1]."""
    c, h, w = shape
    if path.suffix == ".cnoc":
        data = bytes_to_container(path.read_bytes()).data.astype(np.float64)
        if data.shape[:2] != (h, w):
            raise ManifestError("field.targets", f"{path}: expected {h}x{w} target")
        arr = np.moveaxis(data, -1, 0)
    else:
        img = Image.open(path).convert("RGB").resize((w, h), Image.BILINEAR)
        arr = np.moveaxis(np.asarray(img, dtype=np.float64) / 127.5 - 1.0, -1, 0)
    if arr.shape[0] >= c:
        return arr[:c]
    out = np.zeros(shape)
    out[: arr.shape[0]] = arr
    return out


def _build_field(manifest: RunManifest, latent_shape: tuple, base_dir=None):
    spec = dict(manifest.field_spec)
    name = spec.pop("name")
    base = Path(base_dir) if base_dir is not None else Path(".")
    if name == "zero":
        return make_field("zero")
    if name == "seeded_random":
        return make_field("seeded_random", seed=spec.get("seed", manifest.seed),
                          shape=latent_shape, scale=spec.get("scale", 1.0))
    if name == "linear_to_target":
        targets = {
            prompt: _load_target(base / p, latent_shape)
            for prompt, p in spec.get("targets", {}).items()
        }
        return make_field("linear_to_target", targets=targets, steps=manifest.steps)
    raise ManifestError("field.name", f"unknown field {name!r}")


@dataclass(frozen=True)
class RunResult:
    latent: np.ndarray  # (C, h, w)
    latent_bytes: bytes  # CNOC container of the (h, w, C) layout
    preview_bytes: bytes


def build_dos_config(manifest: RunManifest) -> DosConfig:
    scene = manifest.scene
    factor = manifest.latent_downsample
    global_map = render_cnocs(scene, manifest.encoding)
    prompts, maps, masks = [], [], []
    for i in range(len(scene.objects)):
        solo = Scene(camera=scene.camera, objects=(scene.objects[i],),
                     prompt=scene.prompt_for(i))
        per_map = render_cnocs(solo, manifest.encoding)
        prompts.append(scene.prompt_for(i))
        maps.append(per_map)
        masks.append(downsample_mask(object_mask(per_map, 0), factor))
    return DosConfig(steps=manifest.steps, injection_steps=manifest.injection_steps,
                     prompt=scene.prompt, global_map=global_map,
                     object_prompts=prompts, object_maps=maps, masks=masks)


def execute_run(manifest: RunManifest, base_dir=None) -> RunResult:
    cam = manifest.scene.camera
    factor = manifest.latent_downsample
    latent_shape = (manifest.latent_channels, cam.height // factor, cam.width // factor)
    config = build_dos_config(manifest)
    field = _build_field(manifest, latent_shape, base_dir)
    noise = np.random.default_rng(manifest.seed).standard_normal(latent_shape)
    latent = dos_sample(noise, config, field)
    hwc = np.moveaxis(latent, 0, -1)
    return RunResult(latent=latent, latent_bytes=array_to_bytes(hwc),
                     preview_bytes=preview_png(hwc))


def load_manifest(path) -> RunManifest:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    return parse_manifest(doc, base_dir=path.parent)
