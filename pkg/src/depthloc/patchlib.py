"""Persistent store of expert-curated depth patches.

Patches come in three categories: pedestrians (the supervision signal,
whose raster extent doubles as the ground-truth bounding box), objects
(architectonic elements and clutter to be ignored) and noise artifacts
(sensor-error stains). The library lives on disk as a JSON manifest plus
one DFM1 file per patch.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .depthmap import DepthMap, load_dfm, save_dfm

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# Sanity bound on a human silhouette seen from above.
MAX_PEDESTRIAN_EXTENT_M = 1.2


class PatchCategory(enum.Enum):
    PEDESTRIAN = "pedestrian"
    OBJECT = "object"
    NOISE_ARTIFACT = "noise_artifact"


@dataclass(frozen=True)
class Patch:
    id: str
    category: PatchCategory
    map: DepthMap
    source_frame: str | None = None
    source_rect: tuple[int, int, int, int] | None = None
    created_at: str | None = None


def tight_crop(m: DepthMap) -> DepthMap:
    """Trim all-floor border rows and columns. Raises on an all-floor map."""
    fg = m.foreground_mask()
    rows = np.nonzero(fg.any(axis=1))[0]
    cols = np.nonzero(fg.any(axis=0))[0]
    if len(rows) == 0:
        raise ValueError("patch contains no non-floor pixels")
    y0, y1 = rows[0], rows[-1] + 1
    x0, x1 = cols[0], cols[-1] + 1
    if (y0, y1, x0, x1) == (0, m.height, 0, m.width):
        return m
    return m.with_depths(np.ascontiguousarray(m.depths[y0:y1, x0:x1]))


def _check_patch(m: DepthMap, category: PatchCategory) -> None:
    if category is PatchCategory.PEDESTRIAN:
        w_m = m.width * m.pixel_pitch
        h_m = m.height * m.pixel_pitch
        if w_m > MAX_PEDESTRIAN_EXTENT_M or h_m > MAX_PEDESTRIAN_EXTENT_M:
            raise ValueError(
                f"pedestrian patch {w_m:.2f}x{h_m:.2f} m exceeds "
                f"{MAX_PEDESTRIAN_EXTENT_M} m bound"
            )


@dataclass
class PatchLibrary:
    """Directory-backed patch store: <root>/manifest.json, <root>/patches/<id>.dfm.

    Reads are lock-free; mutations are serialized on an internal lock and
    the manifest is replaced atomically (write-then-rename).
    """

    root: Path
    patches: dict[str, Patch] = field(default_factory=dict)
    _order: list[str] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def create(cls, root) -> "PatchLibrary":
        root = Path(root)
        (root / "patches").mkdir(parents=True, exist_ok=True)
        lib = cls(root=root)
        lib.save()
        return lib

    @classmethod
    def load(cls, root) -> "PatchLibrary":
        root = Path(root)
        manifest_path = root / "manifest.json"
        if not manifest_path.exists():
            raise FileNotFoundError(f"no manifest at {manifest_path}")
        try:
            manifest = json.loads(manifest_path.read_text())
        except json.JSONDecodeError as e:
            raise ValueError(f"corrupt manifest at {manifest_path}: {e}") from e
        lib = cls(root=root)
        for entry in manifest["entries"]:
            pid = entry["id"]
            patch_path = root / entry["file"]
            if not patch_path.exists():
                raise FileNotFoundError(
                    f"manifest entry {pid} references missing file {entry['file']}"
                )
            rect = entry.get("source_rect")
            patch = Patch(
                id=pid,
                category=PatchCategory(entry["category"]),
                map=load_dfm(patch_path),
                source_frame=entry.get("source_frame"),
                source_rect=tuple(rect) if rect else None,
                created_at=entry.get("created_at"),
            )
            if pid in lib.patches:
                raise ValueError(f"duplicate patch id {pid} in manifest")
            lib.patches[pid] = patch
            lib._order.append(pid)
        known = {f"patches/{pid}.dfm" for pid in lib.patches}
        for f in sorted((root / "patches").glob("*.dfm")):
            if f"patches/{f.name}" not in known:
                logger.warning("orphaned patch file not in manifest: %s", f)
        return lib

    def _manifest_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "entries": [
                {
                    "id": p.id,
                    "category": p.category.value,
                    "file": f"patches/{p.id}.dfm",
                    "source_frame": p.source_frame,
                    "source_rect": list(p.source_rect) if p.source_rect else None,
                    "created_at": p.created_at,
                }
                for p in (self.patches[pid] for pid in self._order)
            ],
        }

    def _write_manifest(self) -> None:
        tmp = self.root / "manifest.json.tmp"
        tmp.write_text(json.dumps(self._manifest_dict(), indent=2))
        os.replace(tmp, self.root / "manifest.json")

    def save(self) -> None:
        with self._lock:
            (self.root / "patches").mkdir(parents=True, exist_ok=True)
            for pid in self._order:
                path = self.root / "patches" / f"{pid}.dfm"
                if not path.exists():
                    save_dfm(self.patches[pid].map, path)
            self._write_manifest()

    def add_patch(
        self,
        m: DepthMap,
        category: PatchCategory,
        source_frame: str | None = None,
        source_rect: tuple[int, int, int, int] | None = None,
    ) -> Patch:
        """Tighten, persist and index a new patch. Rolls back the raster file
        if the manifest update fails."""
        tight = tight_crop(m)
        _check_patch(tight, category)
        patch = Patch(
            id=uuid.uuid4().hex,
            category=category,
            map=tight,
            source_frame=source_frame,
            source_rect=source_rect,
            created_at=datetime.now(timezone.utc).isoformat(),
        )
        with self._lock:
            path = self.root / "patches" / f"{patch.id}.dfm"
            path.parent.mkdir(parents=True, exist_ok=True)
            save_dfm(patch.map, path)
            self.patches[patch.id] = patch
            self._order.append(patch.id)
            try:
                self._write_manifest()
            except Exception:
                del self.patches[patch.id]
                self._order.remove(patch.id)
                path.unlink(missing_ok=True)
                raise
        return patch

    def delete(self, patch_id: str) -> None:
        with self._lock:
            if patch_id not in self.patches:
                raise KeyError(f"no patch {patch_id}")
            del self.patches[patch_id]
            self._order.remove(patch_id)
            self._write_manifest()
            (self.root / "patches" / f"{patch_id}.dfm").unlink(missing_ok=True)

    def get(self, patch_id: str) -> Patch:
        return self.patches[patch_id]

    def ids(self, category: PatchCategory | None = None) -> list[str]:
        if category is None:
            return list(self._order)
        return [pid for pid in self._order if self.patches[pid].category is category]

    def count(self, category: PatchCategory) -> int:
        return len(self.ids(category))

    def sample(self, category: PatchCategory, rng: np.random.Generator) -> Patch:
        """Uniform draw over the category, deterministic given the rng state."""
        ids = self.ids(category)
        if not ids:
            raise ValueError(f"cannot sample from empty category {category.value}")
        return self.patches[ids[rng.integers(len(ids))]]

    def sample_union(
        self, categories: list[PatchCategory], rng: np.random.Generator
    ) -> Patch:
        """Uniform draw over the union of the given categories."""
        ids = [pid for c in categories for pid in self.ids(c)]
        if not ids:
            raise ValueError("cannot sample from empty category union")
        # keep ids in library order so the draw is library-order deterministic
        ids = [pid for pid in self._order if pid in set(ids)]
        return self.patches[ids[rng.integers(len(ids))]]
