// UI state machine, DOM-free so the curation flow is unit-testable.
// Optimistic updates: a captured patch appears in the gallery immediately
// and is rolled back if the server rejects it (the 422 reason is surfaced
// inline instead).

import { Api, ApiError, CATEGORIES, Category, FrameInfo, PatchInfo } from "./api.js";
import { Rect, dragToRect, rectInBounds } from "./coords.js";

export interface DragState {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export class UiState {
  frames: FrameInfo[] = [];
  currentFrameId: string | null = null;
  zoom = 1;
  panX = 0;
  panY = 0;
  category: Category = "pedestrian";
  galleryFilter: Category | null = null;
  patches: PatchInfo[] = [];
  drag: DragState | null = null;
  pendingRect: Rect | null = null;
  error: string | null = null;
  showGrid = false;

  constructor(private api: Api) {}

  get currentFrame(): FrameInfo | null {
    return this.frames.find((f) => f.id === this.currentFrameId) ?? null;
  }

  async loadFrames(): Promise<void> {
    this.frames = await this.api.listFrames();
    if (this.currentFrameId === null && this.frames.length > 0) {
      this.currentFrameId = this.frames[0].id;
    }
  }

  selectFrame(id: string): void {
    if (!this.frames.some((f) => f.id === id)) {
      throw new Error(`unknown frame ${id}`);
    }
    this.currentFrameId = id;
    this.drag = null;
    this.pendingRect = null;
    this.error = null;
  }

  setCategory(category: Category): void {
    if (!CATEGORIES.includes(category)) {
      throw new Error(`unknown category ${category}`);
    }
    this.category = category;
  }

  setZoom(zoom: number): void {
    this.zoom = Math.min(Math.max(zoom, 0.25), 16);
  }

  /** Drag handling in frame coordinates; the resulting rect is always
   * clamped inside the current frame. */
  beginDrag(x: number, y: number): void {
    this.drag = { x0: x, y0: y, x1: x, y1: y };
    this.pendingRect = null;
  }

  updateDrag(x: number, y: number): void {
    if (this.drag) {
      this.drag.x1 = x;
      this.drag.y1 = y;
    }
  }

  endDrag(): Rect | null {
    const frame = this.currentFrame;
    if (!this.drag || !frame) {
      this.drag = null;
      return null;
    }
    const { x0, y0, x1, y1 } = this.drag;
    this.drag = null;
    const rect = dragToRect(x0, y0, x1, y1, frame.width, frame.height);
    if (!rectInBounds(rect, frame.width, frame.height)) return null;
    this.pendingRect = rect;
    return rect;
  }

  async refreshGallery(): Promise<void> {
    this.patches = await this.api.listPatches(this.galleryFilter ?? undefined);
  }

  get visiblePatches(): PatchInfo[] {
    if (this.galleryFilter === null) return this.patches;
    return this.patches.filter((p) => p.category === this.galleryFilter);
  }

  /** Post the pending rect; optimistic gallery entry, rolled back on error. */
  async capturePatch(): Promise<string | null> {
    const frame = this.currentFrame;
    if (!frame || !this.pendingRect) return null;
    this.error = null;
    const placeholder: PatchInfo = {
      id: "(saving...)",
      category: this.category,
      width: this.pendingRect.w,
      height: this.pendingRect.h,
      source_frame: frame.id,
      created_at: null,
    };
    this.patches = [...this.patches, placeholder];
    try {
      const { id } = await this.api.createPatch(frame.id, this.pendingRect, this.category);
      this.pendingRect = null;
      await this.refreshGallery();
      return id;
    } catch (e) {
      this.patches = this.patches.filter((p) => p !== placeholder);
      this.error = e instanceof ApiError ? e.detail : String(e);
      return null;
    }
  }

  async removePatch(id: string): Promise<void> {
    const snapshot = this.patches;
    this.patches = this.patches.filter((p) => p.id !== id);
    try {
      await this.api.deletePatch(id);
    } catch (e) {
      this.patches = snapshot;
      this.error = e instanceof ApiError ? e.detail : String(e);
    }
  }
}
