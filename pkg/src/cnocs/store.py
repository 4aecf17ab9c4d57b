"""Embedded scene store: JSON append-log plus snapshot, no external services.

Every write appends one log line; the log is folded into a snapshot file
once it grows past a threshold. Load order is snapshot first, then log
replay. A single lock serializes writes (desk-scale traffic).
"""

from __future__ import annotations

import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["SceneRecord", "RevisionConflictError", "UnknownSceneError", "SceneStore"]

SNAPSHOT_EVERY = 256


class RevisionConflictError(Exception):
    def __init__(self, scene_id: str, expected: int, actual: int):
        self.scene_id = scene_id
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"scene {scene_id}: revision {expected} is stale (current {actual})"
        )


class UnknownSceneError(KeyError):
    pass


@dataclass
class SceneRecord:
    scene_id: str
    document: dict
    revision: int
    created: float
    updated: float

    def to_dict(self) -> dict:
        return {
            "id": self.scene_id,
            "scene": self.document,
            "revision": self.revision,
            "created": self.created,
            "updated": self.updated,
        }

    @staticmethod
    def from_dict(doc: dict) -> "SceneRecord":
        return SceneRecord(
            scene_id=doc["id"],
            document=doc["scene"],
            revision=doc["revision"],
            created=doc["created"],
            updated=doc["updated"],
        )


class SceneStore:
    def __init__(self, data_dir):
        self._dir = Path(data_dir)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._log_path = self._dir / "scenes.log"
        self._snapshot_path = self._dir / "scenes.snapshot.json"
        self._lock = threading.Lock()
        self._records: dict[str, SceneRecord] = {}
        self._log_lines = 0
        self._load()

    def _load(self) -> None:
        if self._snapshot_path.exists():
            with open(self._snapshot_path, "r", encoding="utf-8") as f:
                snap = json.load(f)
            for doc in snap.get("records", []):
                rec = SceneRecord.from_dict(doc)
                self._records[rec.scene_id] = rec
        if self._log_path.exists():
            with open(self._log_path, "r", encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if not line:
                        continue
                    entry = json.loads(line)
                    self._log_lines += 1
                    if entry["op"] == "put":
                        rec = SceneRecord.from_dict(entry["record"])
                        self._records[rec.scene_id] = rec
                    elif entry["op"] == "delete":
                        self._records.pop(entry["id"], None)

    def _append(self, entry: dict) -> None:
        with open(self._log_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(entry) + "\n")
        self._log_lines += 1
        if self._log_lines >= SNAPSHOT_EVERY:
            self._write_snapshot()

    def _write_snapshot(self) -> None:
        tmp = self._snapshot_path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump({"records": [r.to_dict() for r in self._records.values()]}, f)
        tmp.replace(self._snapshot_path)
        self._log_path.write_text("")
        self._log_lines = 0

    def create(self, document: dict) -> SceneRecord:
        with self._lock:
            scene_id = secrets.token_urlsafe(8)
            while scene_id in self._records:
                scene_id = secrets.token_urlsafe(8)
            now = time.time()
            rec = SceneRecord(scene_id=scene_id, document=document,
                              revision=1, created=now, updated=now)
            self._records[scene_id] = rec
            self._append({"op": "put", "record": rec.to_dict()})
            return rec

    def get(self, scene_id: str) -> SceneRecord:
        with self._lock:
            try:
                return self._records[scene_id]
            except KeyError:
                raise UnknownSceneError(scene_id) from None

    def update(self, scene_id: str, document: dict, revision: int) -> SceneRecord:
        """Optimistic-concurrency write: `revision` must match the stored one."""
        with self._lock:
            rec = self._records.get(scene_id)
            if rec is None:
                raise UnknownSceneError(scene_id)
            if rec.revision != revision:
                raise RevisionConflictError(scene_id, revision, rec.revision)
            new = SceneRecord(scene_id=scene_id, document=document,
                              revision=rec.revision + 1, created=rec.created,
                              updated=time.time())
            self._records[scene_id] = new
            self._append({"op": "put", "record": new.to_dict()})
            return new

    def delete(self, scene_id: str) -> None:
        with self._lock:
            if scene_id not in self._records:
                raise UnknownSceneError(scene_id)
            del self._records[scene_id]
            self._append({"op": "delete", "id": scene_id})

    def list(self, offset: int = 0, limit: int = 100) -> tuple[list[SceneRecord], int]:
        """Page of records ordered by creation time; returns (page, total)."""
        with self._lock:
            ordered = sorted(self._records.values(), key=lambda r: (r.created, r.scene_id))
            return ordered[offset: offset + limit], len(ordered)
