"""Clustering-based localization baseline.

Foreground pixels (closer than a depth threshold) are sampled uniformly,
the samples undergo complete-linkage agglomerative clustering cut at a
height comparable to a human shoulder width, and clusters with enough
samples are reported as pedestrians. Complete linkage bounds every
cluster's diameter by the cutoff, which is what ties the cut height to a
physical size.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .depthmap import DepthMap


class DetectionSource(enum.Enum):
    CNN = "cnn"
    CLUSTER = "cluster"


@dataclass(frozen=True)
class Detection:
    """Shared output contract of both localizers: centroid and axis-aligned
    box in scene meters, plus a confidence (clustering always emits 1.0)."""

    centroid: tuple[float, float]
    box: tuple[float, float]
    confidence: float
    source: DetectionSource

    def __post_init__(self):
        if self.box[0] <= 0 or self.box[1] <= 0:
            raise ValueError("detection box must have positive size")

    def to_jsonl(self, frame: str) -> str:
        return json.dumps(
            {
                "frame": frame,
                "source": self.source.value,
                "cx": self.centroid[0],
                "cy": self.centroid[1],
                "w": self.box[0],
                "h": self.box[1],
                "confidence": self.confidence,
            }
        )


@dataclass(frozen=True)
class ClusterConfig:
    depth_threshold: float = 3.7  # foreground = closer than this
    n_samples: int = 400
    cutoff: float = 0.45  # dendrogram cut height ~ shoulder size, meters
    min_cluster_size: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.depth_threshold <= 0:
            raise ValueError("depth_threshold must be positive")
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")
        if self.min_cluster_size < 1:
            raise ValueError("min_cluster_size must be >= 1")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


def foreground_mask(m: DepthMap, cfg: ClusterConfig) -> np.ndarray:
    """Boolean raster: true where the depth is closer than the threshold."""
    return m.depths < cfg.depth_threshold


def sample_points(
    mask: np.ndarray, m: DepthMap, n_samples: int, rng: np.random.Generator
) -> np.ndarray:
    """Up to ``n_samples`` pixel-center positions (meters), drawn uniformly
    without replacement from the foreground. Returns an (k, 2) array."""
    ys, xs = np.nonzero(mask)
    k = len(xs)
    if k == 0:
        return np.empty((0, 2), dtype=np.float64)
    if k > n_samples:
        pick = rng.choice(k, size=n_samples, replace=False)
        xs, ys = xs[pick], ys[pick]
    pitch = m.pixel_pitch
    return np.stack([(xs + 0.5) * pitch, (ys + 0.5) * pitch], axis=1)


def complete_linkage(points: np.ndarray, cutoff: float) -> list[list[int]]:
    """Agglomerative complete-linkage clustering of 2-D points.

    Merging stops when the closest pair of clusters (distance = maximum
    pairwise point distance) exceeds the cutoff, so every returned cluster
    has diameter <= cutoff. Ties merge the pair that is lowest in the
    (min original index, max original index) order. Returns member-index
    lists, each sorted, ordered by smallest member."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n == 0:
        return []
    if n == 1:
        return [[0]]
    diff = points[:, None, :] - points[None, :, :]
    d = np.sqrt((diff * diff).sum(-1))
    np.fill_diagonal(d, np.inf)
    members: list[list[int]] = [[i] for i in range(n)]
    # rows stay sorted by smallest original member index: merging always
    # folds the higher row into the lower one
    while len(members) > 1:
        k = len(members)
        tri = np.triu_indices(k, 1)
        flat = d[tri]
        best = int(np.argmin(flat))  # first minimum = lexicographically lowest pair
        if flat[best] > cutoff:
            break
        i, j = int(tri[0][best]), int(tri[1][best])
        # Lance-Williams for complete linkage: new distance is the max
        d[i, :] = np.maximum(d[i, :], d[j, :])
        d[:, i] = d[i, :]
        d[i, i] = np.inf
        d = np.delete(np.delete(d, j, axis=0), j, axis=1)
        members[i] = sorted(members[i] + members[j])
        del members[j]
    return members


def localize(m: DepthMap, cfg: ClusterConfig) -> list[Detection]:
    """foreground -> sample -> cluster -> size filter -> centroid + box."""
    rng = np.random.default_rng(cfg.seed)
    mask = foreground_mask(m, cfg)
    pts = sample_points(mask, m, cfg.n_samples, rng)
    clusters = complete_linkage(pts, cfg.cutoff)
    detections = []
    pitch = m.pixel_pitch
    for cluster in clusters:
        if len(cluster) < cfg.min_cluster_size:
            continue
        cpts = pts[cluster]
        cx, cy = cpts.mean(axis=0)
        # box covers the member pixels' full extent (samples are centers)
        w = float(cpts[:, 0].max() - cpts[:, 0].min() + pitch)
        h = float(cpts[:, 1].max() - cpts[:, 1].min() + pitch)
        detections.append(
            Detection(
                centroid=(float(cx), float(cy)),
                box=(w, h),
                confidence=1.0,
                source=DetectionSource.CLUSTER,
            )
        )
    return detections
