"""Clustering baseline: masking, sampling, complete linkage vs brute force,
end-to-end localization fixtures."""

import numpy as np
import pytest

from depthloc.clusterloc import (
    ClusterConfig,
    Detection,
    DetectionSource,
    complete_linkage,
    foreground_mask,
    localize,
    sample_points,
)
from depthloc.depthmap import DepthMap, from_array, new_background

FLOOR = 4.0
PITCH = 0.018125


def scene_with_blobs(blobs, w=160, h=120):
    """blobs: list of (cx_px, cy_px, half_px, depth)."""
    depths = np.full((h, w), FLOOR, dtype=np.float32)
    for cx, cy, half, d in blobs:
        depths[cy - half : cy + half + 1, cx - half : cx + half + 1] = d
    return DepthMap(depths, PITCH, FLOOR)


def brute_force_linkage(points, cutoff):
    """Independent re-implementation: recompute every cluster-pair distance
    from scratch each merge step, same tie rule (lowest min index, then
    lowest max index)."""
    points = np.asarray(points, dtype=np.float64)
    clusters = [frozenset([i]) for i in range(len(points))]

    def cdist(a, b):
        return max(
            float(np.hypot(*(points[i] - points[j]))) for i in a for j in b
        )

    while len(clusters) > 1:
        best = None
        for ai in range(len(clusters)):
            for bi in range(ai + 1, len(clusters)):
                d = cdist(clusters[ai], clusters[bi])
                key = (d, min(min(clusters[ai]), min(clusters[bi])),
                       max(min(clusters[ai]), min(clusters[bi])))
                if best is None or key < best[0]:
                    best = (key, ai, bi)
        if best[0][0] > cutoff:
            break
        _, ai, bi = best
        clusters[ai] = clusters[ai] | clusters[bi]
        del clusters[bi]
    out = [sorted(c) for c in clusters]
    out.sort(key=lambda c: c[0])
    return out


class TestForegroundMask:
    def test_all_floor(self):
        m = new_background(8, 8, PITCH, FLOOR)
        assert not foreground_mask(m, ClusterConfig()).any()

    def test_single_pixel(self):
        depths = np.full((8, 8), FLOOR, np.float32)
        depths[3, 5] = 1.7
        m = from_array(depths, PITCH, FLOOR)
        mask = foreground_mask(m, ClusterConfig(depth_threshold=3.5))
        assert mask.sum() == 1 and mask[3, 5]

    def test_threshold_at_floor_selects_everything(self):
        m = new_background(8, 8, PITCH, FLOOR)
        mask = foreground_mask(m, ClusterConfig(depth_threshold=FLOOR + 0.1))
        assert mask.all()


class TestSamplePoints:
    def test_empty_mask(self):
        m = new_background(8, 8, PITCH, FLOOR)
        pts = sample_points(np.zeros((8, 8), bool), m, 10, np.random.default_rng(0))
        assert pts.shape == (0, 2)

    def test_exhausts_small_foreground(self):
        m = scene_with_blobs([(10, 10, 1, 2.0)], w=32, h=32)  # 3x3 = 9 px
        mask = foreground_mask(m, ClusterConfig())
        pts = sample_points(mask, m, 100, np.random.default_rng(1))
        assert len(pts) == 9

    def test_metric_conversion_is_pixel_center(self):
        depths = np.full((4, 4), FLOOR, np.float32)
        depths[2, 3] = 2.0
        m = from_array(depths, PITCH, FLOOR)
        mask = foreground_mask(m, ClusterConfig())
        pts = sample_points(mask, m, 5, np.random.default_rng(2))
        assert pts[0] == pytest.approx([(3 + 0.5) * PITCH, (2 + 0.5) * PITCH])

    def test_uniform_single_draws(self):
        m = scene_with_blobs([(8, 8, 1, 2.0)], w=16, h=16)
        mask = foreground_mask(m, ClusterConfig())
        k = int(mask.sum())
        rng = np.random.default_rng(3)
        counts = {}
        n = 10_000
        for _ in range(n):
            pts = sample_points(mask, m, 1, rng)
            key = tuple(np.round(pts[0] / PITCH - 0.5).astype(int))
            counts[key] = counts.get(key, 0) + 1
        p = 1.0 / k
        sigma = np.sqrt(n * p * (1 - p))
        assert len(counts) == k
        for c in counts.values():
            assert abs(c - n * p) < 5 * sigma


class TestCompleteLinkage:
    def test_trivial_sizes(self):
        assert complete_linkage(np.empty((0, 2)), 0.5) == []
        assert complete_linkage(np.array([[1.0, 2.0]]), 0.5) == [[0]]

    def test_two_points_below_cutoff(self):
        pts = np.array([[0.0, 0.0], [0.30, 0.0]])
        assert complete_linkage(pts, 0.45) == [[0, 1]]

    def test_two_points_above_cutoff(self):
        pts = np.array([[0.0, 0.0], [0.60, 0.0]])
        assert complete_linkage(pts, 0.45) == [[0], [1]]

    def test_diameter_bounded_by_cutoff(self):
        rng = np.random.default_rng(4)
        pts = rng.uniform(0, 2, size=(60, 2))
        for cluster in complete_linkage(pts, 0.5):
            sub = pts[cluster]
            d = np.sqrt(((sub[:, None] - sub[None]) ** 2).sum(-1))
            assert d.max() <= 0.5

    def test_partition(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(0, 1, size=(40, 2))
        clusters = complete_linkage(pts, 0.3)
        flat = sorted(i for c in clusters for i in c)
        assert flat == list(range(40))

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(60):
            n = int(rng.integers(1, 9))
            pts = rng.uniform(0, 1.5, size=(n, 2))
            cutoff = float(rng.uniform(0.1, 1.0))
            assert complete_linkage(pts, cutoff) == brute_force_linkage(pts, cutoff)


class TestLocalize:
    def test_all_floor(self):
        m = new_background(64, 64, PITCH, FLOOR)
        assert localize(m, ClusterConfig()) == []

    def test_single_blob(self):
        m = scene_with_blobs([(40, 60, 2, 2.0)])  # 5x5 blob
        cfg = ClusterConfig(n_samples=100, min_cluster_size=3, seed=1)
        dets = localize(m, cfg)
        assert len(dets) == 1
        det = dets[0]
        assert det.source is DetectionSource.CLUSTER
        assert det.confidence == 1.0
        assert det.centroid[0] == pytest.approx((40 + 0.5) * PITCH, abs=PITCH)
        assert det.centroid[1] == pytest.approx((60 + 0.5) * PITCH, abs=PITCH)

    def test_two_blobs_far_apart(self):
        # centers 0.6 m apart (33 px), blobs 3x3 (0.054 m) -> diameter > cutoff
        m = scene_with_blobs([(40, 40, 1, 2.0), (73, 40, 1, 2.0)])
        cfg = ClusterConfig(n_samples=200, min_cluster_size=3, seed=2)
        assert len(localize(m, cfg)) == 2

    def test_two_blobs_close_merge(self):
        # centers 0.30 m apart (17 px): union diameter ~0.35 m < cutoff
        m = scene_with_blobs([(40, 40, 1, 2.0), (57, 40, 1, 2.0)])
        cfg = ClusterConfig(n_samples=200, min_cluster_size=3, seed=3)
        assert len(localize(m, cfg)) == 1

    def test_min_cluster_size_filters(self):
        m = scene_with_blobs([(40, 40, 3, 2.0), (100, 80, 0, 2.0)])  # 7x7 and 1 px
        cfg = ClusterConfig(n_samples=500, min_cluster_size=4, seed=4)
        dets = localize(m, cfg)
        assert len(dets) == 1

    def test_deterministic(self):
        m = scene_with_blobs([(40, 40, 2, 2.0), (90, 70, 2, 1.8)])
        cfg = ClusterConfig(seed=5)
        a = localize(m, cfg)
        b = localize(m, cfg)
        assert a == b

    def test_box_positive(self):
        m = scene_with_blobs([(40, 40, 0, 2.0)])  # single pixel
        cfg = ClusterConfig(min_cluster_size=1, seed=6)
        dets = localize(m, cfg)
        assert dets and dets[0].box[0] > 0 and dets[0].box[1] > 0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ClusterConfig(cutoff=0.0)
        with pytest.raises(ValueError):
            ClusterConfig(min_cluster_size=0)
        with pytest.raises(ValueError):
            Detection(centroid=(0, 0), box=(0.0, 0.1), confidence=1.0,
                      source=DetectionSource.CLUSTER)
