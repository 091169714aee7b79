"""Shared fixtures: synthetic silhouette patches standing in for the
expert-curated library.

Pedestrians are two-level overhead silhouettes (shoulder ellipse plus head
disc) sized below the clustering cutoff so an isolated pedestrian forms one
cluster; objects are box-like slabs at assorted heights; noise artifacts
are sparse pixel stains.
"""

from __future__ import annotations

import numpy as np

from depthloc.depthmap import DepthMap, from_array
from depthloc.patchlib import PatchCategory, PatchLibrary
from depthloc.synth import DEFAULT_FLOOR_DEPTH, DEFAULT_NATIVE_PITCH


def silhouette_map(
    rng: np.random.Generator,
    pitch: float = DEFAULT_NATIVE_PITCH,
    floor: float = DEFAULT_FLOOR_DEPTH,
) -> DepthMap:
    """Overhead pedestrian: shoulder ellipse with a head disc.

    The population mixes adults (shoulder extent 0.40-0.52 m, i.e. around
    the clustering cutoff) with smaller infants, mirroring the crowd mix
    that makes plain clustering merge close subjects and split wide ones."""
    if rng.random() < 0.25:  # infant
        a = rng.uniform(0.11, 0.16)
        b = rng.uniform(0.08, 0.12)
        r_head = rng.uniform(0.05, 0.08)
        h_head = rng.uniform(0.9, 1.3)
    else:  # adult
        a = rng.uniform(0.20, 0.26)
        b = rng.uniform(0.12, 0.17)
        r_head = rng.uniform(0.07, 0.11)
        h_head = rng.uniform(1.5, 1.9)
    h_shoulder = h_head - rng.uniform(0.20, 0.30)

    half_w = a + 0.02
    half_h = b + 0.02
    wpx = max(3, int(np.ceil(2 * half_w / pitch)))
    hpx = max(3, int(np.ceil(2 * half_h / pitch)))
    xs = (np.arange(wpx) - (wpx - 1) / 2) * pitch
    ys = (np.arange(hpx) - (hpx - 1) / 2) * pitch
    X, Y = np.meshgrid(xs, ys)

    depths = np.full((hpx, wpx), floor, dtype=np.float32)
    shoulders = (X / a) ** 2 + (Y / b) ** 2 <= 1.0
    depths[shoulders] = floor - h_shoulder
    hx = rng.uniform(-0.3, 0.3) * a
    hy = rng.uniform(-0.3, 0.3) * b
    head = (X - hx) ** 2 + (Y - hy) ** 2 <= r_head**2
    depths[head] = floor - h_head
    return from_array(depths, pitch, floor)


def object_map(
    rng: np.random.Generator,
    pitch: float = DEFAULT_NATIVE_PITCH,
    floor: float = DEFAULT_FLOOR_DEPTH,
) -> DepthMap:
    """Box-like slab (cart, bag, furniture) at some height above the floor."""
    w_m = rng.uniform(0.20, 0.80)
    h_m = rng.uniform(0.15, 0.60)
    height = rng.uniform(0.20, 1.20)
    wpx = max(2, int(w_m / pitch))
    hpx = max(2, int(h_m / pitch))
    depths = np.full((hpx, wpx), floor, dtype=np.float32)
    depths[:] = floor - height
    # knock out corners so objects are not perfect rectangles
    c = max(1, min(wpx, hpx) // 6)
    depths[:c, :c] = floor
    depths[-c:, -c:] = floor
    return from_array(depths, pitch, floor)


def noise_map(
    rng: np.random.Generator,
    pitch: float = DEFAULT_NATIVE_PITCH,
    floor: float = DEFAULT_FLOOR_DEPTH,
) -> DepthMap:
    """Sensor-error stain: a few scattered pixels at arbitrary depths."""
    side = rng.integers(6, 40)
    depths = np.full((side, side), floor, dtype=np.float32)
    k = int(rng.integers(4, 41))
    ys = rng.integers(0, side, size=k)
    xs = rng.integers(0, side, size=k)
    depths[ys, xs] = rng.uniform(0.5, floor - 0.1, size=k).astype(np.float32)
    return from_array(depths, pitch, floor)


def make_library(
    root,
    seed: int = 0,
    n_pedestrians: int = 20,
    n_objects: int = 5,
    n_noise: int = 5,
) -> PatchLibrary:
    rng = np.random.default_rng(seed)
    lib = PatchLibrary.create(root)
    for _ in range(n_pedestrians):
        lib.add_patch(silhouette_map(rng), PatchCategory.PEDESTRIAN)
    for _ in range(n_objects):
        lib.add_patch(object_map(rng), PatchCategory.OBJECT)
    for _ in range(n_noise):
        lib.add_patch(noise_map(rng), PatchCategory.NOISE_ARTIFACT)
    return lib
