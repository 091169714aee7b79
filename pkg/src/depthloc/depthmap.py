"""Depth-map representation and the min-composition algebra.

A DepthMap is a dense raster of distances (meters) from an overhead sensor
plane. The background is the empty floor, encoded as ``floor_depth``; no
pixel is ever farther than the floor. Scenes are assembled by rigidly
translating maps and taking the component-wise minimum, which keeps the
closest (topmost) surface at every location. The floor is the identity
element of that operation, so clipping and empty regions are all
represented the same way.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

DFM_MAGIC = b"DFM1"
_DFM_HEADER = struct.Struct("<4sIIffI")  # magic, width, height, pitch, floor, reserved
assert _DFM_HEADER.size == 24

# Smallest admissible depth after clamping; depths must stay strictly positive.
MIN_DEPTH = 1e-6


@dataclass(frozen=True)
class Translation:
    """Rigid pixel translation. Out-of-frame content is clipped to floor."""

    dx: int
    dy: int

    def __add__(self, other: "Translation") -> "Translation":
        return Translation(self.dx + other.dx, self.dy + other.dy)


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics for the perspective -> axonometric conversion."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")


@dataclass(frozen=True)
class DepthMap:
    """Immutable rectangular raster of depths in meters.

    ``depths`` is a read-only (height, width) float32 array; every value
    lies in (0, floor_depth]. ``pixel_pitch`` is meters per pixel (square
    pixels).
    """

    depths: np.ndarray = field(repr=False)
    pixel_pitch: float
    floor_depth: float

    def __post_init__(self):
        d = self.depths
        if d.ndim != 2 or d.dtype != np.float32:
            raise ValueError("depths must be a 2-D float32 array")
        if self.pixel_pitch <= 0:
            raise ValueError("pixel_pitch must be positive")
        if self.floor_depth <= 0:
            raise ValueError("floor_depth must be positive")
        if not d.flags.c_contiguous:
            object.__setattr__(self, "depths", np.ascontiguousarray(d))
        self.depths.flags.writeable = False

    @property
    def width(self) -> int:
        return self.depths.shape[1]

    @property
    def height(self) -> int:
        return self.depths.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.depths.shape

    def same_frame(self, other: "DepthMap") -> bool:
        return (
            self.shape == other.shape
            and self.pixel_pitch == other.pixel_pitch
            and self.floor_depth == other.floor_depth
        )

    def with_depths(self, depths: np.ndarray) -> "DepthMap":
        """New map sharing this map's pitch and floor. Trusted internal path:
        the caller guarantees the depth-range invariant."""
        return DepthMap(depths, self.pixel_pitch, self.floor_depth)

    def foreground_mask(self) -> np.ndarray:
        return self.depths < self.floor_depth

    def is_all_floor(self) -> bool:
        return bool((self.depths == self.floor_depth).all())


def new_background(width: int, height: int, pixel_pitch: float, floor_depth: float) -> DepthMap:
    """All-floor map: the identity element of compose_min."""
    if width <= 0 or height <= 0:
        raise ValueError(f"dimensions must be positive, got {width}x{height}")
    if floor_depth <= 0:
        raise ValueError("floor_depth must be positive")
    depths = np.full((height, width), floor_depth, dtype=np.float32)
    return DepthMap(depths, pixel_pitch, floor_depth)


def from_array(depths: np.ndarray, pixel_pitch: float, floor_depth: float) -> DepthMap:
    """Validating constructor for externally supplied rasters."""
    arr = np.ascontiguousarray(depths, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError("depths must be 2-D")
    if not np.isfinite(arr).all():
        raise ValueError("depths must be finite")
    if (arr <= 0).any() or (arr > floor_depth).any():
        raise ValueError("depths must lie in (0, floor_depth]")
    return DepthMap(arr.copy(), pixel_pitch, floor_depth)


def translate(m: DepthMap, t: Translation) -> DepthMap:
    """Shift by integer pixels; content shifted out of frame is dropped and
    uncovered pixels become floor."""
    h, w = m.shape
    out = np.full((h, w), m.floor_depth, dtype=np.float32)
    # destination rows y receive source rows y - dy
    dst_x0, dst_x1 = max(0, t.dx), min(w, w + t.dx)
    dst_y0, dst_y1 = max(0, t.dy), min(h, h + t.dy)
    if dst_x0 < dst_x1 and dst_y0 < dst_y1:
        out[dst_y0:dst_y1, dst_x0:dst_x1] = m.depths[
            dst_y0 - t.dy : dst_y1 - t.dy, dst_x0 - t.dx : dst_x1 - t.dx
        ]
    return m.with_depths(out)


def compose_min(a: DepthMap, b: DepthMap) -> DepthMap:
    """Component-wise minimum: keep the smallest distance per location."""
    if not a.same_frame(b):
        raise ValueError(
            "compose_min requires matching shape, pixel_pitch and floor_depth"
        )
    return a.with_depths(np.minimum(a.depths, b.depths))


def paste_into(
    dest: np.ndarray, patch: DepthMap, centroid_px: tuple[float, float]
) -> tuple[int, int, int, int]:
    """In-place min-composition of ``patch`` onto the writable raster
    ``dest``, raster centroid at ``centroid_px`` (rounded to the lattice).
    Returns the realized clipped pixel bounding box (x, y, w, h)."""
    ch, cw = dest.shape
    cx, cy = centroid_px
    if not (0 <= cx < cw and 0 <= cy < ch):
        raise ValueError(f"centroid {centroid_px} outside canvas frame")
    ph, pw = patch.shape
    # patch raster centroid in its own frame is ((pw-1)/2, (ph-1)/2)
    x0 = int(round(cx - (pw - 1) / 2.0))
    y0 = int(round(cy - (ph - 1) / 2.0))
    sx0, sx1 = max(0, -x0), min(pw, cw - x0)
    sy0, sy1 = max(0, -y0), min(ph, ch - y0)
    if sx0 < sx1 and sy0 < sy1:
        dst = dest[y0 + sy0 : y0 + sy1, x0 + sx0 : x0 + sx1]
        np.minimum(dst, patch.depths[sy0:sy1, sx0:sx1], out=dst)
        return (x0 + sx0, y0 + sy0, sx1 - sx0, sy1 - sy0)
    return (min(max(x0, 0), cw), min(max(y0, 0), ch), 0, 0)


def paste_patch(
    canvas: DepthMap, patch: DepthMap, centroid_px: tuple[float, float]
) -> tuple[DepthMap, tuple[int, int, int, int]]:
    """Min-compose ``patch`` onto ``canvas`` with the patch raster centroid at
    ``centroid_px``.

    Equivalent to embedding the patch on an all-floor canvas-sized map,
    translating so centroids align (rounded to the pixel lattice), and
    taking compose_min. Returns the composed map and the realized pixel
    bounding box (x, y, w, h) of the pasted patch, clipped to the frame;
    an all-floor patch yields a zero-size box.
    """
    if canvas.pixel_pitch != patch.pixel_pitch or canvas.floor_depth != patch.floor_depth:
        raise ValueError("canvas and patch must share pixel_pitch and floor_depth")
    out = np.array(canvas.depths)
    bbox = paste_into(out, patch, centroid_px)
    return canvas.with_depths(out), bbox


def paste_alignment(
    patch: DepthMap, centroid_px: tuple[float, float]
) -> tuple[int, int, float, float]:
    """Top-left corner and realized raster centroid of a paste at ``centroid_px``.

    The realized centroid differs from the request by at most half a pixel
    (lattice rounding)."""
    ph, pw = patch.shape
    x0 = int(round(centroid_px[0] - (pw - 1) / 2.0))
    y0 = int(round(centroid_px[1] - (ph - 1) / 2.0))
    return x0, y0, x0 + (pw - 1) / 2.0, y0 + (ph - 1) / 2.0


def to_axonometric(m: DepthMap, k: Intrinsics, out_pitch: float) -> DepthMap:
    """Re-project a perspective depth image onto a regular top-down metric grid.

    Every non-floor pixel (u, v, d) back-projects to world coordinates
    x = (u-cx)*d/fx, y = (v-cy)*d/fy and splats into the output cell
    containing (x, y), keeping the minimum depth per cell. The output frame
    covers the floor-plane footprint of the input frustum; cell (0, 0)
    starts at the back-projection of pixel (0, 0) at floor depth, so the
    world origin falls in the cell under the principal point.
    """
    if out_pitch <= 0:
        raise ValueError("out_pitch must be positive")
    h, w = m.shape
    f = m.floor_depth
    x_min = (0 - k.cx) * f / k.fx
    x_max = (w - 1 - k.cx) * f / k.fx
    y_min = (0 - k.cy) * f / k.fy
    y_max = (h - 1 - k.cy) * f / k.fy
    out_w = int(np.floor((x_max - x_min) / out_pitch)) + 1
    out_h = int(np.floor((y_max - y_min) / out_pitch)) + 1
    out = np.full((out_h, out_w), f, dtype=np.float32)

    vs, us = np.nonzero(m.foreground_mask())
    if len(us):
        d = m.depths[vs, us].astype(np.float64)
        wx = (us - k.cx) * d / k.fx
        wy = (vs - k.cy) * d / k.fy
        j = np.floor((wx - x_min) / out_pitch).astype(np.int64)
        i = np.floor((wy - y_min) / out_pitch).astype(np.int64)
        keep = (j >= 0) & (j < out_w) & (i >= 0) & (i < out_h)
        np.minimum.at(out, (i[keep], j[keep]), d[keep].astype(np.float32))
    return DepthMap(out, out_pitch, f)


def downsample(m: DepthMap, factor: int) -> DepthMap:
    """Min-pool by ``factor`` in each direction; pitch scales accordingly."""
    if factor < 1:
        raise ValueError("factor must be a positive integer")
    if factor == 1:
        return m
    h, w = m.shape
    if h % factor or w % factor:
        raise ValueError(f"factor {factor} does not divide {w}x{h}")
    # two contiguous single-axis reductions are much faster than one
    # tuple-axis reduction over the strided 4-D view
    pooled = m.depths.reshape(h, w // factor, factor).min(axis=2)
    pooled = pooled.reshape(h // factor, factor, w // factor).min(axis=1)
    return DepthMap(pooled, m.pixel_pitch * factor, m.floor_depth)


# --- DFM1 binary format -------------------------------------------------

def write_dfm(m: DepthMap) -> bytes:
    header = _DFM_HEADER.pack(
        DFM_MAGIC, m.width, m.height, np.float32(m.pixel_pitch), np.float32(m.floor_depth), 0
    )
    return header + m.depths.astype("<f4").tobytes()


def read_dfm(data: bytes) -> DepthMap:
    if len(data) < _DFM_HEADER.size:
        raise ValueError("truncated DFM1 data")
    magic, width, height, pitch, floor, _ = _DFM_HEADER.unpack_from(data)
    if magic != DFM_MAGIC:
        raise ValueError("bad DFM1 magic")
    body = np.frombuffer(data, dtype="<f4", offset=_DFM_HEADER.size)
    if body.size != width * height:
        raise ValueError(
            f"DFM1 body has {body.size} values, expected {width * height}"
        )
    depths = np.ascontiguousarray(body.reshape(height, width))
    return from_array(depths, float(pitch), float(floor))


def save_dfm(m: DepthMap, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write_dfm(m))


def load_dfm(path) -> DepthMap:
    with open(path, "rb") as fh:
        return read_dfm(fh.read())


def read_dfm_header(path) -> tuple[int, int, float, float]:
    """(width, height, pixel_pitch, floor_depth) without loading the raster."""
    with open(path, "rb") as fh:
        data = fh.read(_DFM_HEADER.size)
    magic, width, height, pitch, floor, _ = _DFM_HEADER.unpack(data)
    if magic != DFM_MAGIC:
        raise ValueError("bad DFM1 magic")
    return width, height, float(pitch), float(floor)


# --- 16-bit grayscale PNG codec ------------------------------------------
#
# Pixel value = height above the floor in millimeters, so 0 is the floor and
# brighter means closer to the sensor. This is what the curation UI displays
# and matches the network's input normalization up to scale.

def to_png16(m: DepthMap) -> bytes:
    from PIL import Image

    mm = np.round((m.floor_depth - m.depths) * 1000.0)
    mm = np.clip(mm, 0, 65535).astype(np.uint16)
    img = Image.fromarray(mm)  # uint16 -> 16-bit grayscale
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def from_png16(data: bytes, pixel_pitch: float, floor_depth: float) -> DepthMap:
    from PIL import Image

    img = Image.open(io.BytesIO(data))
    arr = np.asarray(img)
    if arr.dtype != np.uint16:
        raise ValueError(f"expected 16-bit grayscale PNG, got {arr.dtype}")
    depths = floor_depth - arr.astype(np.float32) / 1000.0
    depths = np.clip(depths, MIN_DEPTH, floor_depth)
    return DepthMap(np.ascontiguousarray(depths), pixel_pitch, floor_depth)
