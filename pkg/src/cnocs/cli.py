"""Command-line surface mirroring the HTTP operations on local files.

Exit codes: 0 success, 2 validation error, 1 internal error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .annotate import annotate as annotate_pipeline
from .annotate import load_candidates
from .container import map_to_bytes, preview_png
from .metrics import eval_metrics, load_cases
from .render import EncodingSpec, render_cnocs
from .reward import UnknownFixtureError, fixture_oracles, ground_truth_oracles, reward
from .runs import ManifestError, execute_run, parse_manifest
from .scene import (
    Camera,
    Scene,
    SceneValidationError,
    dump_scene,
    load_scene,
)

VALIDATION_EXIT = 2
INTERNAL_EXIT = 1


def _fail_validation(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(VALIDATION_EXIT)


def _run(fn):
    try:
        fn()
    except (SceneValidationError, ManifestError, UnknownFixtureError, ValueError) as exc:
        _fail_validation(str(exc))
    except FileNotFoundError as exc:
        _fail_validation(f"file not found: {exc.filename or exc}")
    except Exception as exc:  # pragma: no cover - defensive
        click.echo(f"internal error: {exc}", err=True)
        sys.exit(INTERNAL_EXIT)


@click.group()
def main():
    """9-DoF pose conditioning toolkit."""


@main.command()
@click.option("--scene", "scene_path", required=True, type=click.Path())
@click.option("--variant", default="identity", show_default=True,
              type=click.Choice(["constant", "identity", "spherical"]))
@click.option("--degree", default=2, show_default=True, type=int)
@click.option("--include-radius", is_flag=True, default=False)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--preview", "preview_path", default=None, type=click.Path(),
              help="Also write an 8-bit PNG preview here.")
def render(scene_path, variant, degree, include_radius, out_path, preview_path):
    """Rasterize a scene file into a CNOC map container."""

    def go():
        scene = load_scene(scene_path)
        spec = EncodingSpec.parse(variant, degree=degree, include_radius=include_radius)
        cnocs_map = render_cnocs(scene, spec)
        Path(out_path).write_bytes(map_to_bytes(cnocs_map))
        if preview_path:
            png = preview_png(cnocs_map.data, background=cnocs_map.object_index < 0)
            Path(preview_path).write_bytes(png)
        click.echo(f"wrote {out_path} ({cnocs_map.channels} channels, {variant})")

    _run(go)


@main.command("reward")
@click.option("--scene", "scene_path", required=True, type=click.Path())
@click.option("--oracle", default="ground_truth", show_default=True,
              type=click.Choice(["ground_truth", "fixture"]))
@click.option("--fixture", "fixture_path", default=None, type=click.Path())
@click.option("--case-id", default="", type=str)
@click.option("--gamma", default=0.0, show_default=True, type=float)
@click.option("--lambda", "lam", default=1.0, show_default=True, type=float)
@click.option("--kappa", default=10.0, show_default=True, type=float)
def reward_cmd(scene_path, oracle, fixture_path, case_id, gamma, lam, kappa):
    """Evaluate the pose reward of a scene under stub oracles."""

    def go():
        scene = load_scene(scene_path)
        if oracle == "ground_truth":
            det, ori = ground_truth_oracles(scene, kappa=kappa)
        else:
            if not fixture_path:
                raise SceneValidationError("fixture", "--fixture is required")
            det, ori = fixture_oracles(fixture_path, case_id)
        result = reward(None, scene, det, ori, gamma=gamma, lam=lam, kappa=kappa)
        click.echo(json.dumps(result.to_dict(), indent=2))

    _run(go)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--out-dir", required=True, type=click.Path())
def sample(manifest_path, out_dir):
    """Execute a sampling-run manifest, writing latent.cnoc and preview.png."""

    def go():
        path = Path(manifest_path)
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
        manifest = parse_manifest(doc, base_dir=path.parent)
        result = execute_run(manifest, base_dir=path.parent)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "latent.cnoc").write_bytes(result.latent_bytes)
        (out / "preview.png").write_bytes(result.preview_bytes)
        click.echo(f"wrote {out / 'latent.cnoc'} and {out / 'preview.png'}")

    _run(go)


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--rejects", "rejects_path", default=None, type=click.Path())
@click.option("--trim-fraction", default=0.10, show_default=True, type=float)
@click.option("--trim-distance", default=None, type=float,
              help="Absolute centroid-distance trim instead of percentile rank.")
@click.option("--prompt", default="", type=str)
@click.option("--width", default=512, show_default=True, type=int)
@click.option("--height", default=512, show_default=True, type=int)
def annotate(in_path, out_path, rejects_path, trim_fraction, trim_distance,
             prompt, width, height):
    """Fit oriented boxes to candidate point clouds and emit a scene file."""

    def go():
        candidates = load_candidates(in_path)
        fits, rejects = annotate_pipeline(candidates, trim_fraction=trim_fraction,
                                          trim_distance=trim_distance)
        scene = Scene(
            camera=Camera.default(width, height),
            objects=tuple(fit.box for fit, _ in fits),
            prompt=prompt,
        )
        dump_scene(scene, out_path)
        if rejects_path:
            with open(rejects_path, "w", encoding="utf-8") as f:
                for cand, reason in rejects:
                    f.write(json.dumps({"id": cand.candidate_id,
                                        "reason": reason.value}) + "\n")
        click.echo(f"accepted {len(fits)}, rejected {len(rejects)}; wrote {out_path}")

    _run(go)


@main.command("eval-metrics")
@click.option("--cases", "cases_path", required=True, type=click.Path())
def eval_metrics_cmd(cases_path):
    """Compute Acc_ls, mIoU, Abs.Err, and Acc@22.5 over a JSONL case file."""

    def go():
        summary = eval_metrics(load_cases(cases_path))
        click.echo(json.dumps(summary.to_dict(), indent=2))

    _run(go)


@main.command()
@click.option("--addr", default=None, type=str,
              help="host:port, default from CNOCS_ADDR or 127.0.0.1:8787")
@click.option("--data-dir", default=None, type=click.Path())
@click.option("--workers", default=None, type=int)
def serve(addr, data_dir, workers):
    """Start the HTTP service."""
    from .service import main as serve_main

    serve_main(addr=addr, data_dir=data_dir, workers=workers)


if __name__ == "__main__":
    main()
