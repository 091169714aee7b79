// Typed client for the curation service.

import type { Rect } from "./coords.js";
import type { TruthGrid } from "./overlay.js";

export type Category = "pedestrian" | "object" | "noise_artifact";
export const CATEGORIES: Category[] = ["pedestrian", "object", "noise_artifact"];

export interface FrameInfo {
  id: string;
  width: number;
  height: number;
}

export interface PatchInfo {
  id: string;
  category: Category;
  width: number;
  height: number;
  source_frame: string | null;
  created_at: string | null;
}

export interface SynthPreview {
  scene_png_base64: string;
  truth: TruthGrid;
  pedestrian_count: number;
}

export interface DetectionOut {
  source: string;
  cx: number;
  cy: number;
  w: number;
  h: number;
  confidence: number;
}

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function failure(r: Response): Promise<never> {
  let detail = r.statusText;
  try {
    const body = await r.json();
    if (typeof body.detail === "string") detail = body.detail;
    else if (body.detail) detail = JSON.stringify(body.detail);
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError(r.status, detail);
}

export class Api {
  constructor(private base: string = "", private fetchFn: typeof fetch = fetch) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const r = await this.fetchFn(this.base + path, init);
    if (!r.ok) await failure(r);
    return (await r.json()) as T;
  }

  private async bytes(path: string, init?: RequestInit): Promise<Uint8Array> {
    const r = await this.fetchFn(this.base + path, init);
    if (!r.ok) await failure(r);
    return new Uint8Array(await r.arrayBuffer());
  }

  listFrames(): Promise<FrameInfo[]> {
    return this.json("/frames");
  }

  framePng(id: string): Promise<Uint8Array> {
    return this.bytes(`/frames/${encodeURIComponent(id)}.png`);
  }

  createPatch(frameId: string, rect: Rect, category: Category): Promise<{ id: string }> {
    return this.json("/patches", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ frame_id: frameId, rect, category }),
    });
  }

  listPatches(category?: Category): Promise<PatchInfo[]> {
    const q = category ? `?category=${category}` : "";
    return this.json(`/patches${q}`);
  }

  patchPng(id: string): Promise<Uint8Array> {
    return this.bytes(`/patches/${encodeURIComponent(id)}.png`);
  }

  async deletePatch(id: string): Promise<void> {
    const r = await this.fetchFn(`${this.base}/patches/${encodeURIComponent(id)}`, {
      method: "DELETE",
    });
    if (!r.ok) await failure(r);
  }

  augmentPreview(patchId: string, seed: number, config?: object): Promise<Uint8Array> {
    return this.bytes("/augment/preview", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ patch_id: patchId, seed, ...(config ? { config } : {}) }),
    });
  }

  synthPreview(seed: number, config?: object): Promise<SynthPreview> {
    return this.json("/synth/preview", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ seed, ...(config ? { config } : {}) }),
    });
  }

  localize(
    body: { method: "cnn" | "cluster"; frame_id?: string; scene_dfm_base64?: string },
  ): Promise<{ detections: DetectionOut[] }> {
    return this.json("/localize", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }
}
