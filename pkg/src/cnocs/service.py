"""HTTP service: rendering, reward evaluation, sampling runs, scene CRUD.

Scene documents are validated by hand so a 400 can name the offending
field path; degenerate boxes in an otherwise well-formed document are a
422. Sampling runs execute asynchronously on a small FIFO worker pool and
persist their artifacts under the data directory.

Environment: CNOCS_ADDR (default 127.0.0.1:8787), CNOCS_DATA_DIR (default
./cnocs-data), CNOCS_WORKERS (default 2).
"""

from __future__ import annotations

import json
import math
import os
import secrets
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from starlette.concurrency import run_in_threadpool

from .container import map_to_bytes, preview_png
from .render import EncodingSpec, render_cnocs
from .reward import UnknownFixtureError, fixture_oracles, ground_truth_oracles, reward
from .runs import ManifestError, execute_run, parse_manifest
from .scene import DegenerateBoxError, SceneValidationError, scene_from_dict
from .store import RevisionConflictError, SceneStore, UnknownSceneError

__all__ = ["create_app", "main"]

DEFAULT_ADDR = "127.0.0.1:8787"
DEFAULT_WORKERS = 2


def _error(status: int, message: str, path: str | None = None) -> JSONResponse:
    body = {"error": message}
    if path is not None:
        body["path"] = path
    return JSONResponse(status_code=status, content=body)


class RunManager:
    """FIFO pool executing sampling runs; artifacts land on disk."""

    def __init__(self, runs_dir: Path, workers: int):
        self._dir = runs_dir
        self._dir.mkdir(parents=True, exist_ok=True)
        self._pool = ThreadPoolExecutor(max_workers=workers)
        self._lock = threading.Lock()
        self._runs: dict[str, dict] = {}

    def submit(self, manifest_doc: dict, base_dir=None) -> str:
        manifest = parse_manifest(manifest_doc, base_dir=base_dir)  # validate upfront
        run_id = secrets.token_urlsafe(8)
        with self._lock:
            self._runs[run_id] = {"status": "queued", "error": None}
        self._pool.submit(self._execute, run_id, manifest, base_dir)
        return run_id

    def _execute(self, run_id: str, manifest, base_dir) -> None:
        with self._lock:
            self._runs[run_id]["status"] = "running"
        try:
            result = execute_run(manifest, base_dir=base_dir)
            out = self._dir / run_id
            out.mkdir(parents=True, exist_ok=True)
            (out / "latent.cnoc").write_bytes(result.latent_bytes)
            (out / "preview.png").write_bytes(result.preview_bytes)
            with self._lock:
                self._runs[run_id]["status"] = "done"
        except Exception as exc:  # surfaced through the status endpoint
            with self._lock:
                self._runs[run_id]["status"] = "failed"
                self._runs[run_id]["error"] = str(exc)

    def status(self, run_id: str) -> dict | None:
        with self._lock:
            info = self._runs.get(run_id)
            return dict(info) if info is not None else None

    def artifact(self, run_id: str, name: str) -> bytes | None:
        info = self.status(run_id)
        if info is None or info["status"] != "done":
            return None
        path = self._dir / run_id / name
        return path.read_bytes() if path.exists() else None

    def shutdown(self) -> None:
        self._pool.shutdown(wait=True)


def create_app(data_dir=None, workers: int | None = None) -> FastAPI:
    data_dir = Path(data_dir or os.environ.get("CNOCS_DATA_DIR", "cnocs-data"))
    if workers is None:
        workers = int(os.environ.get("CNOCS_WORKERS", DEFAULT_WORKERS))
    app = FastAPI(title="cnocs", version="0.1.0")
    store = SceneStore(data_dir / "scenes")
    runs = RunManager(data_dir / "runs", workers)
    app.state.store = store
    app.state.runs = runs
    app.state.data_dir = data_dir

    async def _json_body(request: Request) -> dict:
        try:
            return await request.json()
        except json.JSONDecodeError:
            raise SceneValidationError(".", "request body is not valid JSON") from None

    @app.exception_handler(DegenerateBoxError)
    async def _degenerate(request, exc):
        return _error(422, exc.message, exc.path)

    @app.exception_handler(SceneValidationError)
    async def _invalid_scene(request, exc):
        return _error(400, exc.message, exc.path)

    @app.exception_handler(ManifestError)
    async def _invalid_manifest(request, exc):
        return _error(400, exc.message, exc.path)

    @app.post("/v1/render")
    async def render_endpoint(request: Request):
        doc = await _json_body(request)
        if "scene" not in doc:
            raise SceneValidationError("scene", "missing field")
        scene = scene_from_dict(doc["scene"])
        try:
            spec = EncodingSpec.parse(
                str(doc.get("variant", "identity")),
                degree=doc.get("degree", 2),
                include_radius=bool(doc.get("include_radius", False)),
            )
        except ValueError as exc:
            raise SceneValidationError("variant", str(exc)) from None
        # keep the event loop free under concurrent renders
        cnocs_map = await run_in_threadpool(render_cnocs, scene, spec)
        headers = {
            "X-Cnocs-Channels": str(cnocs_map.channels),
            "X-Cnocs-Variant": spec.variant.value,
        }
        if doc.get("preview", False):
            png = preview_png(cnocs_map.data, background=cnocs_map.object_index < 0)
            return Response(content=png, media_type="image/png", headers=headers)
        return Response(content=map_to_bytes(cnocs_map),
                        media_type="application/octet-stream", headers=headers)

    @app.post("/v1/reward")
    async def reward_endpoint(request: Request):
        doc = await _json_body(request)
        if "scene" not in doc:
            raise SceneValidationError("scene", "missing field")
        scene = scene_from_dict(doc["scene"])
        if not scene.objects:
            raise SceneValidationError("scene.objects", "reward needs a non-empty scene")
        gamma = doc.get("gamma", 0.0)
        lam = doc.get("lambda", 1.0)
        kappa = doc.get("kappa", 10.0)
        for key, value in (("gamma", gamma), ("lambda", lam)):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise SceneValidationError(key, "expected a number")
        oracle = doc.get("oracle", "ground_truth")
        if oracle == "ground_truth":
            det, ori = ground_truth_oracles(scene, kappa=kappa)
        elif oracle == "fixture":
            fixture = doc.get("fixture")
            if not fixture:
                raise SceneValidationError("fixture", "missing fixture reference")
            fixture_path = data_dir / "fixtures" / fixture
            try:
                det, ori = fixture_oracles(fixture_path, str(doc.get("case_id", "")))
            except UnknownFixtureError as exc:
                return _error(404, str(exc))
        else:
            raise SceneValidationError("oracle", "expected 'ground_truth' or 'fixture'")
        result = await run_in_threadpool(
            reward, None, scene, det, ori,
            gamma=float(gamma), lam=float(lam), kappa=float(kappa))
        return JSONResponse(content=_finite_json(result.to_dict()))

    @app.post("/v1/sample")
    async def submit_run(request: Request):
        doc = await _json_body(request)
        run_id = runs.submit(doc, base_dir=data_dir)
        return JSONResponse(status_code=202, content={"id": run_id, "status": "queued"})

    @app.get("/v1/sample/{run_id}")
    async def run_status(run_id: str):
        info = runs.status(run_id)
        if info is None:
            return _error(404, f"unknown run {run_id}")
        body = {"id": run_id, "status": info["status"]}
        if info["error"]:
            body["error"] = info["error"]
        if info["status"] == "done":
            body["artifacts"] = {
                "latent": f"/v1/sample/{run_id}/latent",
                "preview": f"/v1/sample/{run_id}/preview",
            }
        return JSONResponse(content=body)

    @app.get("/v1/sample/{run_id}/latent")
    async def run_latent(run_id: str):
        blob = runs.artifact(run_id, "latent.cnoc")
        if blob is None:
            return _error(404, f"no latent artifact for run {run_id}")
        return Response(content=blob, media_type="application/octet-stream")

    @app.get("/v1/sample/{run_id}/preview")
    async def run_preview(run_id: str):
        blob = runs.artifact(run_id, "preview.png")
        if blob is None:
            return _error(404, f"no preview artifact for run {run_id}")
        return Response(content=blob, media_type="image/png")

    @app.post("/v1/scenes")
    async def create_scene(request: Request):
        doc = await _json_body(request)
        scene_from_dict(doc)  # validate before persisting
        rec = store.create(doc)
        return JSONResponse(status_code=201, content=rec.to_dict())

    @app.get("/v1/scenes")
    async def list_scenes(offset: int = 0, limit: int = 100):
        page, total = store.list(offset=offset, limit=limit)
        return JSONResponse(content={
            "total": total,
            "offset": offset,
            "scenes": [r.to_dict() for r in page],
        })

    @app.get("/v1/scenes/{scene_id}")
    async def fetch_scene(scene_id: str):
        try:
            return JSONResponse(content=store.get(scene_id).to_dict())
        except UnknownSceneError:
            return _error(404, f"unknown scene {scene_id}")

    @app.put("/v1/scenes/{scene_id}")
    async def update_scene(scene_id: str, request: Request):
        doc = await _json_body(request)
        if "scene" not in doc:
            raise SceneValidationError("scene", "missing field")
        revision = doc.get("revision")
        if isinstance(revision, bool) or not isinstance(revision, int):
            raise SceneValidationError("revision", "expected an integer")
        scene_from_dict(doc["scene"])
        try:
            rec = store.update(scene_id, doc["scene"], revision)
        except UnknownSceneError:
            return _error(404, f"unknown scene {scene_id}")
        except RevisionConflictError as exc:
            return _error(409, str(exc))
        return JSONResponse(content=rec.to_dict())

    @app.delete("/v1/scenes/{scene_id}")
    async def delete_scene(scene_id: str):
        try:
            store.delete(scene_id)
        except UnknownSceneError:
            return _error(404, f"unknown scene {scene_id}")
        return Response(status_code=204)

    return app


def _finite_json(obj):
    """Replace non-finite floats so the response stays strict JSON."""
    if isinstance(obj, dict):
        return {k: _finite_json(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite_json(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def main(addr: str | None = None, data_dir=None, workers: int | None = None) -> None:
    import uvicorn

    addr = addr or os.environ.get("CNOCS_ADDR", DEFAULT_ADDR)
    host, _, port = addr.partition(":")
    app = create_app(data_dir=data_dir, workers=workers)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8787))
