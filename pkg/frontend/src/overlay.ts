// Truth-box overlay math. The server reports, per occupied grid cell, the
// centroid normalized to [0,1) within the cell and the box size normalized
// to the full image; the overlay reconstructs the pixel rectangle exactly
// as the evaluator does, so boxes align pixel-exactly at zoom 1.

import type { Rect, Viewport } from "./coords.js";
import { frameToCanvas } from "./coords.js";

export interface CellTruth {
  x: number;
  y: number;
  w: number;
  h: number;
  n: number;
  p: number;
}

export interface GridSpec {
  s: number;
  width: number;
  height: number;
  extent_w: number;
  extent_h: number;
}

export interface TruthGrid {
  grid: GridSpec;
  cells: CellTruth[];
}

/** Pixel rectangle (image space, floats) of one occupied cell's truth box. */
export function truthCellToPixelRect(cell: CellTruth, index: number, grid: GridSpec): Rect {
  const cellW = grid.width / grid.s;
  const cellH = grid.height / grid.s;
  const row = Math.floor(index / grid.s);
  const col = index % grid.s;
  const cx = (col + cell.x) * cellW;
  const cy = (row + cell.y) * cellH;
  const w = cell.w * grid.width;
  const h = cell.h * grid.height;
  return { x: cx - w / 2, y: cy - h / 2, w, h };
}

export function occupiedRects(truth: TruthGrid): { index: number; rect: Rect }[] {
  const out: { index: number; rect: Rect }[] = [];
  truth.cells.forEach((cell, index) => {
    if (cell.p === 1.0) {
      out.push({ index, rect: truthCellToPixelRect(cell, index, truth.grid) });
    }
  });
  return out;
}

/** Image-space rect to canvas-space rect; identity when zoom=1, pan=0. */
export function rectToCanvas(rect: Rect, v: Viewport): Rect {
  const tl = frameToCanvas(v, rect.x, rect.y);
  return { x: tl.x, y: tl.y, w: rect.w * v.zoom, h: rect.h * v.zoom };
}

/** Grid-line positions (canvas space) for an s-by-s overlay. */
export function gridLines(grid: GridSpec, v: Viewport): { xs: number[]; ys: number[] } {
  const xs: number[] = [];
  const ys: number[] = [];
  for (let k = 0; k <= grid.s; k++) {
    xs.push(frameToCanvas(v, (k * grid.width) / grid.s, 0).x);
    ys.push(frameToCanvas(v, 0, (k * grid.height) / grid.s).y);
  }
  return { xs, ys };
}
