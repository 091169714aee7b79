// DOM wiring for the curator UI. All depth semantics (cropping, tightening,
// truth) live on the server; this file only routes events and pixels.

import { Api, CATEGORIES, Category } from "./api.js";
import { canvasToFrame, Viewport } from "./coords.js";
import { gridLines, occupiedRects, rectToCanvas, TruthGrid } from "./overlay.js";
import { decodePng16, toImageDataPixels } from "./png16.js";
import { UiState } from "./state.js";

const api = new Api("");
const state = new UiState(api);

const el = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
};

const frameList = el<HTMLUListElement>("frame-list");
const canvas = el<HTMLCanvasElement>("frame-canvas");
const ctx = canvas.getContext("2d")!;
const errorBox = el<HTMLDivElement>("error-box");
const gallery = el<HTMLDivElement>("gallery");
const augmentImg = el<HTMLCanvasElement>("augment-canvas");
const synthCanvas = el<HTMLCanvasElement>("synth-canvas");

let frameBitmap: ImageData | null = null;
let synthTruth: TruthGrid | null = null;

function viewport(): Viewport {
  return { zoom: state.zoom, panX: state.panX, panY: state.panY };
}

function drawPng16To(target: HTMLCanvasElement, pixels: Uint8ClampedArray<ArrayBuffer>, w: number, h: number, scale = 1) {
  target.width = w * scale;
  target.height = h * scale;
  const tctx = target.getContext("2d")!;
  tctx.imageSmoothingEnabled = false;
  const tmp = document.createElement("canvas");
  tmp.width = w;
  tmp.height = h;
  tmp.getContext("2d")!.putImageData(new ImageData(pixels, w, h), 0, 0);
  tctx.drawImage(tmp, 0, 0, w * scale, h * scale);
}

function redraw() {
  const frame = state.currentFrame;
  ctx.imageSmoothingEnabled = false;
  ctx.fillStyle = "#181818";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  if (!frame || !frameBitmap) return;
  const v = viewport();
  const tmp = document.createElement("canvas");
  tmp.width = frame.width;
  tmp.height = frame.height;
  tmp.getContext("2d")!.putImageData(frameBitmap, 0, 0);
  ctx.drawImage(
    tmp, v.panX, v.panY, frame.width * v.zoom, frame.height * v.zoom,
  );
  if (state.showGrid) {
    const grid = { s: 5, width: frame.width, height: frame.height, extent_w: 2.9, extent_h: 2.2 };
    const { xs, ys } = gridLines(grid, v);
    ctx.strokeStyle = "rgba(120, 220, 120, 0.6)";
    ctx.lineWidth = 1;
    ctx.beginPath();
    for (const x of xs) { ctx.moveTo(x, ys[0]); ctx.lineTo(x, ys[ys.length - 1]); }
    for (const y of ys) { ctx.moveTo(xs[0], y); ctx.lineTo(xs[xs.length - 1], y); }
    ctx.stroke();
  }
  const rect = state.pendingRect;
  const drag = state.drag;
  ctx.strokeStyle = "#ffcc00";
  ctx.lineWidth = 1.5;
  if (drag) {
    const a = rectToCanvas(
      { x: Math.min(drag.x0, drag.x1), y: Math.min(drag.y0, drag.y1),
        w: Math.abs(drag.x1 - drag.x0), h: Math.abs(drag.y1 - drag.y0) }, v);
    ctx.strokeRect(a.x, a.y, a.w, a.h);
  } else if (rect) {
    const a = rectToCanvas(rect, v);
    ctx.strokeRect(a.x, a.y, a.w, a.h);
  }
}

function showError(msg: string | null) {
  errorBox.textContent = msg ?? "";
  errorBox.style.display = msg ? "block" : "none";
}

async function loadCurrentFrame() {
  const frame = state.currentFrame;
  if (!frame) return;
  const png = await decodePng16(await api.framePng(frame.id));
  frameBitmap = new ImageData(toImageDataPixels(png), png.width, png.height);
  redraw();
}

function renderFrameList() {
  frameList.innerHTML = "";
  for (const f of state.frames) {
    const li = document.createElement("li");
    li.textContent = `${f.id} (${f.width}x${f.height})`;
    li.className = f.id === state.currentFrameId ? "selected" : "";
    li.onclick = async () => {
      state.selectFrame(f.id);
      renderFrameList();
      showError(null);
      await loadCurrentFrame();
    };
    frameList.appendChild(li);
  }
  if (state.frames.length === 0) {
    const li = document.createElement("li");
    li.textContent = "no frames — point --frames at a directory of .dfm files";
    frameList.appendChild(li);
  }
}

async function renderGallery() {
  gallery.innerHTML = "";
  for (const p of state.visiblePatches) {
    const card = document.createElement("div");
    card.className = "patch-card";
    const cv = document.createElement("canvas");
    card.appendChild(cv);
    const label = document.createElement("div");
    label.textContent = `${p.category} ${p.width}x${p.height}`;
    card.appendChild(label);
    const del = document.createElement("button");
    del.textContent = "delete";
    del.onclick = async () => {
      await state.removePatch(p.id);
      showError(state.error);
      await renderGallery();
    };
    card.appendChild(del);
    gallery.appendChild(card);
    if (p.id !== "(saving...)") {
      try {
        const png = await decodePng16(await api.patchPng(p.id));
        drawPng16To(cv, toImageDataPixels(png), png.width, png.height, 2);
      } catch {
        /* thumbnail failures are non-fatal */
      }
    }
  }
}

function wireCanvas() {
  canvas.onmousedown = (e) => {
    const p = canvasToFrame(viewport(), e.offsetX, e.offsetY);
    state.beginDrag(p.x, p.y);
    redraw();
  };
  canvas.onmousemove = (e) => {
    if (!state.drag) return;
    const p = canvasToFrame(viewport(), e.offsetX, e.offsetY);
    state.updateDrag(p.x, p.y);
    redraw();
  };
  canvas.onmouseup = () => {
    state.endDrag();
    redraw();
  };
}

function wireControls() {
  const categorySelect = el<HTMLSelectElement>("category");
  for (const c of CATEGORIES) {
    const opt = document.createElement("option");
    opt.value = c;
    opt.textContent = c;
    categorySelect.appendChild(opt);
  }
  categorySelect.onchange = () => state.setCategory(categorySelect.value as Category);

  el<HTMLButtonElement>("save-patch").onclick = async () => {
    const id = await state.capturePatch();
    showError(state.error);
    if (id) {
      await renderGallery();
      redraw();
    }
  };

  el<HTMLInputElement>("grid-toggle").onchange = (e) => {
    state.showGrid = (e.target as HTMLInputElement).checked;
    redraw();
  };
  el<HTMLInputElement>("zoom").onchange = (e) => {
    state.setZoom(Number((e.target as HTMLInputElement).value));
    redraw();
  };
  const filterSelect = el<HTMLSelectElement>("gallery-filter");
  filterSelect.onchange = async () => {
    state.galleryFilter = (filterSelect.value || null) as Category | null;
    await state.refreshGallery();
    await renderGallery();
  };

  el<HTMLButtonElement>("augment-run").onclick = async () => {
    const patchId = el<HTMLInputElement>("augment-patch").value.trim()
      || state.visiblePatches[0]?.id;
    if (!patchId) return showError("no patch to preview");
    const seed = Number(el<HTMLInputElement>("augment-seed").value) || 0;
    try {
      const png = await decodePng16(await api.augmentPreview(patchId, seed));
      drawPng16To(augmentImg, toImageDataPixels(png), png.width, png.height, 2);
      showError(null);
    } catch (e) {
      showError(String(e));
    }
  };

  el<HTMLButtonElement>("synth-run").onclick = async () => {
    const seed = Number(el<HTMLInputElement>("synth-seed").value) || 0;
    const q = Number(el<HTMLInputElement>("synth-q").value) || 0.5;
    try {
      const preview = await api.synthPreview(seed, { q });
      const raw = Uint8Array.from(atob(preview.scene_png_base64), (c) => c.charCodeAt(0));
      const png = await decodePng16(raw);
      drawPng16To(synthCanvas, toImageDataPixels(png), png.width, png.height, 2);
      synthTruth = preview.truth;
      const sctx = synthCanvas.getContext("2d")!;
      sctx.strokeStyle = "#ff5555";
      sctx.lineWidth = 1;
      for (const { rect } of occupiedRects(synthTruth)) {
        sctx.strokeRect(rect.x * 2, rect.y * 2, rect.w * 2, rect.h * 2);
      }
      el<HTMLSpanElement>("synth-count").textContent =
        `${preview.pedestrian_count} pedestrians`;
      showError(null);
    } catch (e) {
      showError(String(e));
    }
  };
}

async function boot() {
  wireCanvas();
  wireControls();
  await state.loadFrames();
  renderFrameList();
  await state.refreshGallery();
  await renderGallery();
  await loadCurrentFrame();
  canvas.width = 820;
  canvas.height = 620;
  redraw();
}

boot().catch((e) => showError(String(e)));
