"""Annotated synthetic scene generation.

A scene starts as an empty (all-floor) native-resolution canvas. Each grid
cell receives a pedestrian patch with probability q, pasted with its
centroid uniform over the cell interior; a Poisson(lambda) number of
distractor patches (objects and noise artifacts) land at uniform positions
anywhere in frame; Gaussian noise is added to the composed image, which is
then min-pooled down to the network's input resolution. The ground truth
records, per occupied cell, the cell-normalized centroid and the
image-normalized clipped bounding box.

Everything is deterministic given the seed; scene i of a dataset uses seed
base_seed + i, so generation parallelizes and reruns are bit-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import AugmentConfig, gaussian_noise, random_augment
from .depthmap import DepthMap, downsample, paste_into, save_dfm
from .patchlib import PatchCategory, PatchLibrary

# Default geometry: a single overhead sensor about 4 m above the ground
# covering roughly 2.9 m x 2.2 m at VGA resolution.
DEFAULT_FLOOR_DEPTH = 4.0
DEFAULT_EXTENT = (2.9, 2.2)
DEFAULT_NATIVE = (640, 480)
DEFAULT_DOWNSAMPLE = 4
# Square pixels, pinned to the major axis: 2.9 m / 640 px.
DEFAULT_NATIVE_PITCH = DEFAULT_EXTENT[0] / DEFAULT_NATIVE[0]

# Margin (native pixels) keeping drawn centroids strictly inside their cell
# even after lattice rounding.
_CELL_MARGIN_PX = 1.0


@dataclass(frozen=True)
class GridSpec:
    """S x S detection grid over a (width x height)-pixel image covering
    extent_w x extent_h meters. Cells are equal-sized in continuous
    coordinates; fractional pixel cell sizes are legal."""

    s: int
    width: int = 160
    height: int = 120
    extent_w: float = DEFAULT_EXTENT[0]
    extent_h: float = DEFAULT_EXTENT[1]

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("grid must have at least one cell per side")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")

    @property
    def cells(self) -> int:
        return self.s * self.s

    @property
    def cell_w(self) -> float:
        return self.width / self.s

    @property
    def cell_h(self) -> float:
        return self.height / self.s

    @property
    def pixel_pitch(self) -> float:
        """Meters per pixel, pinned to the horizontal extent (square pixels)."""
        return self.extent_w / self.width

    def area(self) -> float:
        return self.extent_w * self.extent_h

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "width": self.width,
            "height": self.height,
            "extent_w": self.extent_w,
            "extent_h": self.extent_h,
        }

    @staticmethod
    def from_dict(d: dict) -> "GridSpec":
        return GridSpec(**d)


def min_center_distance(grid: GridSpec) -> float:
    """Worst-case minimum distance between first-neighbor centroids admitted
    by the grid constraint: one pedestrian per cell."""
    return grid.extent_w / grid.s


@dataclass(frozen=True)
class SynthConfig:
    grid: GridSpec
    q: float = 0.5
    lam: float = 3.0
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    noise_sigma: float = 0.01
    native_width: int = DEFAULT_NATIVE[0]
    native_height: int = DEFAULT_NATIVE[1]
    downsample_factor: int = DEFAULT_DOWNSAMPLE
    floor_depth: float = DEFAULT_FLOOR_DEPTH

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("q must lie in [0, 1]")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.native_width != self.grid.width * self.downsample_factor:
            raise ValueError("native_width must equal grid.width * downsample_factor")
        if self.native_height != self.grid.height * self.downsample_factor:
            raise ValueError("native_height must equal grid.height * downsample_factor")

    @property
    def native_pitch(self) -> float:
        return self.grid.pixel_pitch / self.downsample_factor

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "q": self.q,
            "lam": self.lam,
            "augment": self.augment.to_dict(),
            "noise_sigma": self.noise_sigma,
            "native_width": self.native_width,
            "native_height": self.native_height,
            "downsample_factor": self.downsample_factor,
            "floor_depth": self.floor_depth,
        }

    @staticmethod
    def from_dict(d: dict) -> "SynthConfig":
        kwargs = dict(d)
        kwargs["grid"] = GridSpec.from_dict(kwargs["grid"])
        if "augment" in kwargs:
            kwargs["augment"] = AugmentConfig.from_dict(kwargs["augment"])
        return SynthConfig(**kwargs)


def default_config(s: int = 5, **overrides) -> SynthConfig:
    return SynthConfig(grid=GridSpec(s=s), **overrides)


@dataclass(frozen=True)
class CellTruth:
    """Ground-truth cell record: centroid (x, y) normalized to [0, 1) within
    the cell, box (w, h) normalized to the full image, and the occupancy
    pair n = 1 - p. Empty cells carry zero placeholders."""

    x: float = 0.0
    y: float = 0.0
    w: float = 0.0
    h: float = 0.0
    n: float = 1.0
    p: float = 0.0

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h, "n": self.n, "p": self.p}


@dataclass(frozen=True)
class GroundTruthGrid:
    grid: GridSpec
    cells: tuple[CellTruth, ...]

    def __post_init__(self):
        if len(self.cells) != self.grid.cells:
            raise ValueError("cell count must equal s^2")

    @property
    def occupied_count(self) -> int:
        return sum(1 for c in self.cells if c.p == 1.0)

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(spatial (s^2, 4), p (s^2,)) float32 training targets."""
        sp = np.array([[c.x, c.y, c.w, c.h] for c in self.cells], dtype=np.float32)
        p = np.array([c.p for c in self.cells], dtype=np.float32)
        return sp, p

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(), "cells": [c.to_dict() for c in self.cells]}

    @staticmethod
    def from_dict(d: dict) -> "GroundTruthGrid":
        return GroundTruthGrid(
            grid=GridSpec.from_dict(d["grid"]),
            cells=tuple(CellTruth(**c) for c in d["cells"]),
        )


@dataclass(frozen=True)
class Scene:
    image: DepthMap
    truth: GroundTruthGrid
    seed: int
    pedestrian_count: int
    distractor_count: int = 0


def generate_scene(cfg: SynthConfig, lib: PatchLibrary, seed: int) -> Scene:
    """Synthesize one annotated scene. Deterministic given the seed.

    Draw order (fixed for reproducibility): per-cell Bernoulli occupancy in
    row-major order, then per occupied cell the patch index, augmentation
    draws and centroid position; then the Poisson distractor count followed
    by per-distractor draws; finally the scene noise field.
    """
    if lib.count(PatchCategory.PEDESTRIAN) == 0:
        raise ValueError("patch library has no pedestrian patches")
    rng = np.random.default_rng(seed)
    grid = cfg.grid
    s = grid.s
    f = cfg.downsample_factor
    canvas = np.full(
        (cfg.native_height, cfg.native_width), cfg.floor_depth, dtype=np.float32
    )

    occupancy = rng.random(s * s) < cfg.q
    cell_w_n = cfg.native_width / s
    cell_h_n = cfg.native_height / s

    cells: list[CellTruth] = [CellTruth()] * (s * s)
    count = 0
    for idx in range(s * s):
        if not occupancy[idx]:
            continue
        row, col = divmod(idx, s)
        patch = lib.sample(PatchCategory.PEDESTRIAN, rng)
        patch = random_augment(patch, cfg.augment, rng)
        x_lo, x_hi = col * cell_w_n, (col + 1) * cell_w_n
        y_lo, y_hi = row * cell_h_n, (row + 1) * cell_h_n
        cx = _uniform_interior(rng, x_lo, x_hi)
        cy = _uniform_interior(rng, y_lo, y_hi)
        bx, by, bw, bh = paste_into(canvas, patch.map, (cx, cy))
        ph, pw = patch.map.shape
        # realized centroid in continuous native coordinates (pixel u spans
        # [u, u+1)); pre-clip patch span is [x0, x0+pw)
        x0 = int(round(cx - (pw - 1) / 2.0))
        y0 = int(round(cy - (ph - 1) / 2.0))
        rcx, rcy = x0 + pw / 2.0, y0 + ph / 2.0
        cells[idx] = CellTruth(
            x=(rcx - x_lo) / cell_w_n,
            y=(rcy - y_lo) / cell_h_n,
            w=bw / cfg.native_width,
            h=bh / cfg.native_height,
            n=0.0,
            p=1.0,
        )
        count += 1

    has_distractors = (
        lib.count(PatchCategory.OBJECT) + lib.count(PatchCategory.NOISE_ARTIFACT) > 0
    )
    n_distractors = 0
    if has_distractors and cfg.lam > 0:
        n_distractors = int(rng.poisson(cfg.lam))
        for _ in range(n_distractors):
            patch = lib.sample_union(
                [PatchCategory.OBJECT, PatchCategory.NOISE_ARTIFACT], rng
            )
            patch = random_augment(patch, cfg.augment, rng)
            cx = float(rng.uniform(0, cfg.native_width))
            cy = float(rng.uniform(0, cfg.native_height))
            paste_into(canvas, patch.map, (cx, cy))

    native = DepthMap(canvas, cfg.native_pitch, cfg.floor_depth)
    if cfg.noise_sigma > 0:
        native = gaussian_noise(native, cfg.noise_sigma, rng)
    image = downsample(native, f)
    truth = GroundTruthGrid(grid=grid, cells=tuple(cells))
    return Scene(
        image=image,
        truth=truth,
        seed=seed,
        pedestrian_count=count,
        distractor_count=n_distractors,
    )


def _uniform_interior(rng: np.random.Generator, lo: float, hi: float) -> float:
    a, b = lo + _CELL_MARGIN_PX, hi - _CELL_MARGIN_PX
    if a >= b:  # degenerate cell smaller than the safety margin
        return (lo + hi) / 2.0
    return float(rng.uniform(a, b))


def scene_file_names(index: int) -> tuple[str, str]:
    return f"{index:05d}.dfm", f"{index:05d}.truth.json"


def generate_dataset(
    cfg: SynthConfig, lib: PatchLibrary, base_seed: int, count: int, out_dir
) -> dict:
    """Write ``count`` scenes (seeds base_seed .. base_seed+count-1) plus a
    manifest. Re-running with the same arguments reproduces identical bytes."""
    if count < 1:
        raise ValueError("count must be >= 1")
    out_dir = Path(out_dir)
    scenes_dir = out_dir / "scenes"
    scenes_dir.mkdir(parents=True, exist_ok=True)
    ped_counts: list[int] = []
    distractor_counts: list[int] = []
    for i in range(count):
        scene = generate_scene(cfg, lib, base_seed + i)
        dfm_name, truth_name = scene_file_names(i)
        save_dfm(scene.image, scenes_dir / dfm_name)
        (scenes_dir / truth_name).write_text(
            json.dumps(scene.truth.to_dict(), sort_keys=True)
        )
        ped_counts.append(scene.pedestrian_count)
        distractor_counts.append(scene.distractor_count)
    manifest = {
        "schema_version": 1,
        "config": cfg.to_dict(),
        "base_seed": base_seed,
        "count": count,
        "pedestrian_counts": ped_counts,
        "distractor_counts": distractor_counts,
    }
    (out_dir / "dataset.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def load_dataset(dataset_dir) -> tuple[dict, list[Scene]]:
    """Read back a generated dataset directory."""
    from .depthmap import load_dfm

    dataset_dir = Path(dataset_dir)
    manifest = json.loads((dataset_dir / "dataset.json").read_text())
    scenes = []
    for i in range(manifest["count"]):
        dfm_name, truth_name = scene_file_names(i)
        image = load_dfm(dataset_dir / "scenes" / dfm_name)
        truth = GroundTruthGrid.from_dict(
            json.loads((dataset_dir / "scenes" / truth_name).read_text())
        )
        scenes.append(
            Scene(
                image=image,
                truth=truth,
                seed=manifest["base_seed"] + i,
                pedestrian_count=truth.occupied_count,
            )
        )
    return manifest, scenes
