"""Request/response models for the curation service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..augment import AugmentConfig
from ..synth import GridSpec, SynthConfig


class FrameInfo(BaseModel):
    id: str
    width: int
    height: int


class Rect(BaseModel):
    x: int = Field(ge=0)
    y: int = Field(ge=0)
    w: int = Field(gt=0)
    h: int = Field(gt=0)


class PatchCreateRequest(BaseModel):
    frame_id: str
    rect: Rect
    category: Literal["pedestrian", "object", "noise_artifact"]


class PatchCreateResponse(BaseModel):
    id: str


class PatchInfo(BaseModel):
    id: str
    category: str
    width: int
    height: int
    source_frame: Optional[str] = None
    created_at: Optional[str] = None


class AugmentConfigModel(BaseModel):
    dihedral_enabled: bool = True
    dropout_rate: float = Field(default=0.05, ge=0.0, le=1.0)
    addition_rate: float = Field(default=0.05, ge=0.0, le=1.0)
    depth_shift_range: tuple[float, float] = (-0.15, 0.15)
    noise_sigma: float = Field(default=0.01, ge=0.0)

    def to_config(self) -> AugmentConfig:
        return AugmentConfig(
            dihedral_enabled=self.dihedral_enabled,
            dropout_rate=self.dropout_rate,
            addition_rate=self.addition_rate,
            depth_shift_range=tuple(self.depth_shift_range),
            noise_sigma=self.noise_sigma,
        )


class AugmentPreviewRequest(BaseModel):
    patch_id: str
    config: AugmentConfigModel = Field(default_factory=AugmentConfigModel)
    seed: int = 0


class GridSpecModel(BaseModel):
    s: int = Field(default=5, ge=1)
    width: int = 160
    height: int = 120
    extent_w: float = 2.9
    extent_h: float = 2.2

    def to_spec(self) -> GridSpec:
        return GridSpec(
            s=self.s,
            width=self.width,
            height=self.height,
            extent_w=self.extent_w,
            extent_h=self.extent_h,
        )


class SynthConfigModel(BaseModel):
    grid: GridSpecModel = Field(default_factory=GridSpecModel)
    q: float = Field(default=0.5, ge=0.0, le=1.0)
    lam: float = Field(default=3.0, ge=0.0)
    augment: AugmentConfigModel = Field(default_factory=AugmentConfigModel)
    noise_sigma: float = Field(default=0.01, ge=0.0)
    downsample_factor: int = Field(default=4, ge=1)
    floor_depth: float = Field(default=4.0, gt=0.0)

    def to_config(self) -> SynthConfig:
        grid = self.grid.to_spec()
        return SynthConfig(
            grid=grid,
            q=self.q,
            lam=self.lam,
            augment=self.augment.to_config(),
            noise_sigma=self.noise_sigma,
            native_width=grid.width * self.downsample_factor,
            native_height=grid.height * self.downsample_factor,
            downsample_factor=self.downsample_factor,
            floor_depth=self.floor_depth,
        )


class SynthPreviewRequest(BaseModel):
    config: SynthConfigModel = Field(default_factory=SynthConfigModel)
    seed: int = 0


class SynthPreviewResponse(BaseModel):
    scene_png_base64: str
    truth: dict
    pedestrian_count: int


class ClusterParams(BaseModel):
    depth_threshold: Optional[float] = None  # default: floor_depth - 0.3
    n_samples: int = Field(default=400, ge=1)
    cutoff: float = Field(default=0.45, gt=0.0)
    min_cluster_size: int = Field(default=5, ge=1)
    seed: int = 0


class LocalizeRequest(BaseModel):
    method: Literal["cnn", "cluster"]
    frame_id: Optional[str] = None
    scene_dfm_base64: Optional[str] = None
    params: ClusterParams = Field(default_factory=ClusterParams)
    threshold: float = Field(default=0.5, gt=0.0, lt=1.0)


class DetectionModel(BaseModel):
    source: str
    cx: float
    cy: float
    w: float
    h: float
    confidence: float


class LocalizeResponse(BaseModel):
    detections: list[DetectionModel]
