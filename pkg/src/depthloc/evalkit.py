"""Per-cell evaluation protocol.

Both localizers are scored on a cell basis: a cell is a true positive when
it is correctly predicted to hold the centroid of a bounding box. Precision
and recall are averaged per frame within buckets keyed by the true
pedestrian count, and every true-positive cell contributes the IoU of its
predicted and true boxes.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .clusterloc import Detection
from .synth import GridSpec, GroundTruthGrid


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def precision(c: ConfusionCounts) -> float | None:
    """tp / (tp + fp); None when there are no positive predictions."""
    denom = c.tp + c.fp
    return c.tp / denom if denom else None


def recall(c: ConfusionCounts) -> float | None:
    """tp / (tp + fn); None when the truth holds no positives."""
    denom = c.tp + c.fn
    return c.tp / denom if denom else None


def iou(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> float:
    """Intersection over union of two centered boxes (cx, cy, w, h)."""
    acx, acy, aw, ah = a
    bcx, bcy, bw, bh = b
    if aw <= 0 or ah <= 0 or bw <= 0 or bh <= 0:
        raise ValueError("boxes must have positive size")
    ix = min(acx + aw / 2, bcx + bw / 2) - max(acx - aw / 2, bcx - bw / 2)
    iy = min(acy + ah / 2, bcy + bh / 2) - max(acy - ah / 2, bcy - bh / 2)
    inter = max(ix, 0.0) * max(iy, 0.0)
    union = aw * ah + bw * bh - inter
    return inter / union


@dataclass
class GridOccupancy:
    """Thresholded detections collapsed onto the grid: per-cell occupancy
    plus the representing (highest-confidence) box per occupied cell."""

    grid: GridSpec
    occupied: np.ndarray  # (s^2,) bool
    boxes: dict[int, tuple[float, float, float, float]]  # cell -> cx, cy, w, h
    confidences: dict[int, float]


def detections_to_grid(
    dets: list[Detection], grid: GridSpec, threshold: float
) -> GridOccupancy:
    """A cell is occupied iff at least one detection above the threshold has
    its centroid inside it (half-open cell intervals); the most confident
    detection represents the cell."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    pitch = grid.pixel_pitch
    extent_x = grid.width * pitch
    extent_y = grid.height * pitch
    occupied = np.zeros(grid.cells, dtype=bool)
    boxes: dict[int, tuple[float, float, float, float]] = {}
    confidences: dict[int, float] = {}
    for det in dets:
        cx, cy = det.centroid
        if not (0.0 <= cx < extent_x and 0.0 <= cy < extent_y):
            raise ValueError(f"detection centroid {det.centroid} outside scene extent")
        if det.confidence <= threshold:
            continue
        col = int(cx / pitch / grid.cell_w)
        row = int(cy / pitch / grid.cell_h)
        cell = row * grid.s + col
        if not occupied[cell] or det.confidence > confidences[cell]:
            occupied[cell] = True
            confidences[cell] = det.confidence
            boxes[cell] = (cx, cy, det.box[0], det.box[1])
    return GridOccupancy(grid=grid, occupied=occupied, boxes=boxes, confidences=confidences)


def truth_boxes_m(truth: GroundTruthGrid) -> dict[int, tuple[float, float, float, float]]:
    """Occupied truth cells as centered metric boxes (cx, cy, w, h)."""
    grid = truth.grid
    pitch = grid.pixel_pitch
    out = {}
    for i, c in enumerate(truth.cells):
        if c.p != 1.0:
            continue
        row, col = divmod(i, grid.s)
        out[i] = (
            (col + c.x) * grid.cell_w * pitch,
            (row + c.y) * grid.cell_h * pitch,
            c.w * grid.width * pitch,
            c.h * grid.height * pitch,
        )
    return out


def confusion(pred: GridOccupancy, truth: GroundTruthGrid) -> ConfusionCounts:
    if pred.grid.s != truth.grid.s:
        raise ValueError("prediction and truth grids differ")
    truth_occ = np.array([c.p == 1.0 for c in truth.cells])
    p = pred.occupied
    return ConfusionCounts(
        tp=int((p & truth_occ).sum()),
        fp=int((p & ~truth_occ).sum()),
        fn=int((~p & truth_occ).sum()),
        tn=int((~p & ~truth_occ).sum()),
    )


@dataclass
class BucketStats:
    n_frames: int = 0
    precision: float | None = None
    recall: float | None = None
    mean_iou: float | None = None


@dataclass
class EvalReport:
    """Precision/recall/IoU conditioned on the true pedestrian count."""

    buckets: dict[int, BucketStats] = field(default_factory=dict)
    overall: BucketStats = field(default_factory=BucketStats)
    threshold: float = 0.5

    def to_dict(self) -> dict:
        def row(b: BucketStats) -> dict:
            return {
                "n_frames": b.n_frames,
                "precision": b.precision,
                "recall": b.recall,
                "mean_iou": b.mean_iou,
            }

        return {
            "threshold": self.threshold,
            "buckets": {str(k): row(b) for k, b in sorted(self.buckets.items())},
            "overall": row(self.overall),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["bucket", "n_frames", "precision", "recall", "mean_iou"])

        def fmt(v):
            return "" if v is None else repr(v)

        for k, b in sorted(self.buckets.items()):
            writer.writerow([k, b.n_frames, fmt(b.precision), fmt(b.recall), fmt(b.mean_iou)])
        o = self.overall
        writer.writerow(["all", o.n_frames, fmt(o.precision), fmt(o.recall), fmt(o.mean_iou)])
        return buf.getvalue()


def _aggregate(frames: list[dict]) -> BucketStats:
    precisions = [f["precision"] for f in frames if f["precision"] is not None]
    recalls = [f["recall"] for f in frames if f["recall"] is not None]
    ious = [v for f in frames for v in f["ious"]]
    return BucketStats(
        n_frames=len(frames),
        precision=float(np.mean(precisions)) if precisions else None,
        recall=float(np.mean(recalls)) if recalls else None,
        mean_iou=float(np.mean(ious)) if ious else None,
    )


def evaluate(
    frames: list[tuple[list[Detection], GroundTruthGrid]],
    grid: GridSpec,
    threshold: float = 0.5,
) -> EvalReport:
    """Score a frame list; frames are bucketed by their true pedestrian
    count. Frames with an undefined precision or recall are excluded from
    that metric's average only."""
    if not frames:
        raise ValueError("no frames to evaluate")
    per_frame: list[dict] = []
    for dets, truth in frames:
        occ = detections_to_grid(dets, grid, threshold)
        conf = confusion(occ, truth)
        tboxes = truth_boxes_m(truth)
        ious = [
            iou(occ.boxes[cell], tboxes[cell]) for cell in occ.boxes if cell in tboxes
        ]
        per_frame.append(
            {
                "count": truth.occupied_count,
                "precision": precision(conf),
                "recall": recall(conf),
                "ious": ious,
            }
        )
    report = EvalReport(threshold=threshold)
    by_count: dict[int, list[dict]] = {}
    for f in per_frame:
        by_count.setdefault(f["count"], []).append(f)
    for count, fs in by_count.items():
        report.buckets[count] = _aggregate(fs)
    report.overall = _aggregate(per_frame)
    return report
