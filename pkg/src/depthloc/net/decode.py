"""Turn grid predictions into metric detections."""

from __future__ import annotations

import numpy as np

from ..clusterloc import Detection, DetectionSource
from ..synth import GridSpec
from .model import GridPrediction

# Raw head outputs are unconstrained; clip the cell-relative centroid into
# the emitting cell and floor the box size so detections stay well-formed.
_EPS = 1e-6


def decode(pred: GridPrediction, grid: GridSpec, threshold: float) -> list[Detection]:
    """One detection per cell whose object probability exceeds the threshold.

    Centroids are denormalized from cell-relative coordinates to scene
    meters; the detection count is non-increasing in the threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    if pred.s != grid.s:
        raise ValueError("prediction grid does not match the grid spec")
    pitch = grid.pixel_pitch
    cell_w_px, cell_h_px = grid.cell_w, grid.cell_h
    detections = []
    for i in range(grid.cells):
        p = float(pred.probs[i, 1])
        if p <= threshold:
            continue
        row, col = divmod(i, grid.s)
        x, y, w, h = (float(v) for v in pred.spatial[i])
        x = min(max(x, 0.0), 1.0 - _EPS)
        y = min(max(y, 0.0), 1.0 - _EPS)
        cx = (col + x) * cell_w_px * pitch
        cy = (row + y) * cell_h_px * pitch
        bw = max(w, _EPS) * grid.width * pitch
        bh = max(h, _EPS) * grid.height * pitch
        detections.append(
            Detection(
                centroid=(cx, cy),
                box=(bw, bh),
                confidence=p,
                source=DetectionSource.CNN,
            )
        )
    return detections
