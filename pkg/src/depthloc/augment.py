"""Patch transformations that stretch a small library into unlimited variation.

Per-patch transforms: the eight dihedral elements (90-degree rotations and
horizontal flips), speckle removal (pixels dropped to the floor), speckle
addition (floor pixels raised to the patch's median non-floor depth) and
rigid depth shifts. Gaussian noise is also defined here but is applied to
the fully composed scene, not to individual patches.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .depthmap import MIN_DEPTH, DepthMap
from .patchlib import Patch, tight_crop

_AUGMENT_MAX_RETRIES = 10


class SpeckleMode(enum.Enum):
    REMOVE = "remove"
    ADD = "add"


@dataclass(frozen=True)
class AugmentConfig:
    dihedral_enabled: bool = True
    dropout_rate: float = 0.05
    addition_rate: float = 0.05
    depth_shift_range: tuple[float, float] = (-0.15, 0.15)
    noise_sigma: float = 0.01  # scene-level; random_augment does not apply it

    def __post_init__(self):
        if not (0.0 <= self.dropout_rate <= 1.0 and 0.0 <= self.addition_rate <= 1.0):
            raise ValueError("speckle rates must lie in [0, 1]")
        if self.depth_shift_range[0] > self.depth_shift_range[1]:
            raise ValueError("depth_shift_range must be (min, max)")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    @staticmethod
    def identity() -> "AugmentConfig":
        return AugmentConfig(
            dihedral_enabled=False,
            dropout_rate=0.0,
            addition_rate=0.0,
            depth_shift_range=(0.0, 0.0),
            noise_sigma=0.0,
        )

    def to_dict(self) -> dict:
        return {
            "dihedral_enabled": self.dihedral_enabled,
            "dropout_rate": self.dropout_rate,
            "addition_rate": self.addition_rate,
            "depth_shift_range": list(self.depth_shift_range),
            "noise_sigma": self.noise_sigma,
        }

    @staticmethod
    def from_dict(d: dict) -> "AugmentConfig":
        kwargs = dict(d)
        if "depth_shift_range" in kwargs:
            kwargs["depth_shift_range"] = tuple(kwargs["depth_shift_range"])
        return AugmentConfig(**kwargs)


def dihedral(m: DepthMap, element: int) -> DepthMap:
    """Apply one of the 8 symmetries of the square (D4).

    Elements 0-3 rotate clockwise by 0/90/180/270 degrees; elements 4-7
    additionally flip horizontally first. Pure pixel permutation: the
    multiset of depths is unchanged. Element 0 is the identity.
    """
    if element not in range(8):
        raise ValueError(f"dihedral element must be in 0..7, got {element}")
    d = m.depths
    if element >= 4:
        d = d[:, ::-1]
    d = np.rot90(d, k=-(element % 4))  # negative k rotates clockwise
    return m.with_depths(np.ascontiguousarray(d))


def speckle(
    m: DepthMap, mode: SpeckleMode, rate: float, rng: np.random.Generator
) -> DepthMap:
    """Independently select each pixel with probability ``rate``.

    REMOVE drops selected pixels to the floor. ADD raises selected floor
    pixels to the median of the map's non-floor depths.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must lie in [0, 1]")
    fg = m.foreground_mask()
    if mode is SpeckleMode.ADD and not fg.any():
        raise ValueError("speckle ADD requires at least one non-floor pixel")
    if rate == 0.0:
        return m
    selected = rng.random(m.shape) < rate
    if mode is SpeckleMode.REMOVE:
        if not selected.any():
            return m
        out = np.array(m.depths)
        out[selected] = m.floor_depth
    else:
        eligible = selected & ~fg
        if not eligible.any():
            return m
        out = np.array(m.depths)
        out[eligible] = np.float32(np.median(m.depths[fg]))
    return m.with_depths(out)


def depth_shift(m: DepthMap, dz: float) -> DepthMap:
    """Add ``dz`` meters to every non-floor pixel; floor pixels untouched.

    The shifted foreground must stay strictly inside (0, floor_depth),
    otherwise it would merge into the background or go behind the sensor.
    """
    fg = m.foreground_mask()
    if dz == 0.0 or not fg.any():
        return m
    shifted = m.depths[fg] + np.float32(dz)
    if (shifted <= 0).any() or (shifted >= m.floor_depth).any():
        raise ValueError(
            f"depth shift {dz:+.3f} m pushes pixels outside (0, {m.floor_depth})"
        )
    out = np.array(m.depths)
    out[fg] = shifted
    return m.with_depths(out)


def gaussian_noise(m: DepthMap, sigma: float, rng: np.random.Generator) -> DepthMap:
    """Add i.i.d. N(0, sigma^2) to every pixel, clamped to (0, floor_depth]."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0.0:
        return m
    noisy = m.depths + rng.normal(0.0, sigma, size=m.shape).astype(np.float32)
    np.clip(noisy, MIN_DEPTH, m.floor_depth, out=noisy)
    return m.with_depths(noisy)


def random_augment(patch: Patch, cfg: AugmentConfig, rng: np.random.Generator) -> Patch:
    """Randomized per-patch transform: dihedral element, speckle in both
    modes, uniform depth shift, then crop re-tightening.

    Draws that leave the patch invalid (everything speckled away, shift out
    of range) are resampled up to 10 times before raising.
    """
    last_err: Exception | None = None
    for _ in range(_AUGMENT_MAX_RETRIES):
        element = int(rng.integers(8)) if cfg.dihedral_enabled else 0
        m = dihedral(patch.map, element)
        try:
            m = speckle(m, SpeckleMode.REMOVE, cfg.dropout_rate, rng)
            if not m.foreground_mask().any():
                raise ValueError("speckle removed every foreground pixel")
            m = speckle(m, SpeckleMode.ADD, cfg.addition_rate, rng)
            lo, hi = cfg.depth_shift_range
            dz = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
            if dz != 0.0:
                m = depth_shift(m, dz)
        except ValueError as e:
            last_err = e
            continue
        return replace(patch, map=tight_crop(m))
    raise ValueError(f"augmentation failed after {_AUGMENT_MAX_RETRIES} attempts: {last_err}")
