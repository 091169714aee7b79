"""FastAPI facade: browse frames, crop and label patches, preview
augmentations and synthetic scenes, run the localizers.

Frames are read-only DFM1 files; the patch library is the only mutable
state and its writes are serialized inside PatchLibrary. Pure compute
(previews, localization) runs freely in parallel.
"""

from __future__ import annotations

import base64
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware

from ..augment import random_augment
from ..clusterloc import ClusterConfig, localize
from ..depthmap import from_array, load_dfm, read_dfm, read_dfm_header, to_png16, write_dfm
from ..patchlib import PatchCategory, PatchLibrary
from ..synth import generate_scene
from . import schemas


class FrameStore:
    """Read-only directory of DFM1 frames; the file stem is the frame id."""

    def __init__(self, root):
        self.root = Path(root)
        if not self.root.is_dir():
            raise FileNotFoundError(f"frame directory {self.root} does not exist")

    def list_frames(self) -> list[schemas.FrameInfo]:
        out = []
        for f in sorted(self.root.glob("*.dfm")):
            width, height, _, _ = read_dfm_header(f)
            out.append(schemas.FrameInfo(id=f.stem, width=width, height=height))
        return out

    def path(self, frame_id: str) -> Path:
        p = self.root / f"{frame_id}.dfm"
        if not p.exists() or p.parent != self.root:
            raise KeyError(frame_id)
        return p

    def load(self, frame_id: str):
        return load_dfm(self.path(frame_id))


def create_app(
    frame_dir, patch_root, checkpoint_path=None, ui_dir=None
) -> FastAPI:
    app = FastAPI(title="depthloc curation service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    frames = FrameStore(frame_dir)
    patch_root = Path(patch_root)
    if (patch_root / "manifest.json").exists():
        library = PatchLibrary.load(patch_root)
    else:
        library = PatchLibrary.create(patch_root)

    net_params = None
    if checkpoint_path is not None:
        from ..net.checkpoint import load_checkpoint

        net_params = load_checkpoint(checkpoint_path)

    def _frame_or_404(frame_id: str):
        try:
            return frames.load(frame_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no frame {frame_id}")

    def _patch_or_404(patch_id: str):
        try:
            return library.get(patch_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no patch {patch_id}")

    @app.get("/frames")
    def list_frames() -> list[schemas.FrameInfo]:
        return frames.list_frames()

    @app.get("/frames/{frame_id}.png")
    def frame_png(frame_id: str):
        m = _frame_or_404(frame_id)
        return Response(content=to_png16(m), media_type="image/png")

    @app.get("/frames/{frame_id}.dfm")
    def frame_dfm(frame_id: str):
        m = _frame_or_404(frame_id)
        return Response(content=write_dfm(m), media_type="application/octet-stream")

    @app.post("/patches", status_code=201)
    def create_patch(req: schemas.PatchCreateRequest) -> schemas.PatchCreateResponse:
        m = _frame_or_404(req.frame_id)
        r = req.rect
        if r.x + r.w > m.width or r.y + r.h > m.height:
            raise HTTPException(status_code=422, detail="rect outside frame bounds")
        crop = from_array(
            m.depths[r.y : r.y + r.h, r.x : r.x + r.w], m.pixel_pitch, m.floor_depth
        )
        try:
            patch = library.add_patch(
                crop,
                PatchCategory(req.category),
                source_frame=req.frame_id,
                source_rect=(r.x, r.y, r.w, r.h),
            )
        except ValueError as e:
            if "no non-floor" in str(e):
                raise HTTPException(status_code=422, detail="empty patch: rect covers only floor")
            raise HTTPException(status_code=422, detail=str(e))
        return schemas.PatchCreateResponse(id=patch.id)

    @app.get("/patches")
    def list_patches(category: str | None = None) -> list[schemas.PatchInfo]:
        cat = PatchCategory(category) if category else None
        return [
            schemas.PatchInfo(
                id=p.id,
                category=p.category.value,
                width=p.map.width,
                height=p.map.height,
                source_frame=p.source_frame,
                created_at=p.created_at,
            )
            for p in (library.get(pid) for pid in library.ids(cat))
        ]

    @app.get("/patches/{patch_id}.png")
    def patch_png(patch_id: str):
        p = _patch_or_404(patch_id)
        return Response(content=to_png16(p.map), media_type="image/png")

    @app.delete("/patches/{patch_id}", status_code=204)
    def delete_patch(patch_id: str):
        try:
            library.delete(patch_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no patch {patch_id}")
        return Response(status_code=204)

    @app.post("/augment/preview")
    def augment_preview(req: schemas.AugmentPreviewRequest):
        p = _patch_or_404(req.patch_id)
        rng = np.random.default_rng(req.seed)
        try:
            out = random_augment(p, req.config.to_config(), rng)
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e))
        return Response(content=to_png16(out.map), media_type="image/png")

    @app.post("/synth/preview")
    def synth_preview(req: schemas.SynthPreviewRequest) -> schemas.SynthPreviewResponse:
        if library.count(PatchCategory.PEDESTRIAN) == 0:
            raise HTTPException(
                status_code=409, detail="patch library has no pedestrian patches"
            )
        try:
            scene = generate_scene(req.config.to_config(), library, req.seed)
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e))
        return schemas.SynthPreviewResponse(
            scene_png_base64=base64.b64encode(to_png16(scene.image)).decode(),
            truth=scene.truth.to_dict(),
            pedestrian_count=scene.pedestrian_count,
        )

    @app.post("/localize")
    def localize_endpoint(req: schemas.LocalizeRequest) -> schemas.LocalizeResponse:
        if (req.frame_id is None) == (req.scene_dfm_base64 is None):
            raise HTTPException(
                status_code=422, detail="provide exactly one of frame_id or scene_dfm_base64"
            )
        if req.frame_id is not None:
            m = _frame_or_404(req.frame_id)
        else:
            try:
                m = read_dfm(base64.b64decode(req.scene_dfm_base64))
            except ValueError as e:
                raise HTTPException(status_code=422, detail=f"bad DFM payload: {e}")

        if req.method == "cluster":
            p = req.params
            cfg = ClusterConfig(
                depth_threshold=(
                    p.depth_threshold
                    if p.depth_threshold is not None
                    else m.floor_depth - 0.3
                ),
                n_samples=p.n_samples,
                cutoff=p.cutoff,
                min_cluster_size=p.min_cluster_size,
                seed=p.seed,
            )
            dets = localize(m, cfg)
        else:
            if net_params is None:
                raise HTTPException(
                    status_code=409, detail="no checkpoint loaded for cnn localization"
                )
            from ..net.decode import decode
            from ..net.model import forward
            from ..synth import GridSpec

            arch = net_params.arch
            if m.shape != (arch.input_h, arch.input_w):
                raise HTTPException(
                    status_code=422,
                    detail=f"frame is {m.width}x{m.height}, "
                    f"checkpoint expects {arch.input_w}x{arch.input_h}",
                )
            grid = GridSpec(
                s=arch.s,
                width=arch.input_w,
                height=arch.input_h,
                extent_w=m.width * m.pixel_pitch,
                extent_h=m.height * m.pixel_pitch,
            )
            dets = decode(forward(net_params, m), grid, req.threshold)
        return schemas.LocalizeResponse(
            detections=[
                schemas.DetectionModel(
                    source=d.source.value,
                    cx=d.centroid[0],
                    cy=d.centroid[1],
                    w=d.box[0],
                    h=d.box[1],
                    confidence=d.confidence,
                )
                for d in dets
            ]
        )

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
