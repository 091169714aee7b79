// Viewport math: the canvas shows the frame scaled by an integer-friendly
// zoom with a pan offset. Rectangles sent to the server are always integer
// pixel coordinates in the frame's native space, whatever the zoom.

export interface Viewport {
  zoom: number;
  panX: number;
  panY: number;
}

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export function frameToCanvas(v: Viewport, x: number, y: number): { x: number; y: number } {
  return { x: x * v.zoom + v.panX, y: y * v.zoom + v.panY };
}

export function canvasToFrame(v: Viewport, x: number, y: number): { x: number; y: number } {
  return { x: (x - v.panX) / v.zoom, y: (y - v.panY) / v.zoom };
}

/** Integer pixel rect from two drag corners (frame coordinates), clamped to
 * the frame bounds; always at least 1x1 when the drag stays inside. */
export function dragToRect(
  x0: number, y0: number, x1: number, y1: number,
  frameW: number, frameH: number,
): Rect {
  const clamp = (v: number, hi: number) => Math.min(Math.max(v, 0), hi);
  const ax = clamp(Math.floor(Math.min(x0, x1)), frameW - 1);
  const ay = clamp(Math.floor(Math.min(y0, y1)), frameH - 1);
  const bx = clamp(Math.ceil(Math.max(x0, x1)), frameW);
  const by = clamp(Math.ceil(Math.max(y0, y1)), frameH);
  return { x: ax, y: ay, w: Math.max(bx - ax, 1), h: Math.max(by - ay, 1) };
}

export function rectInBounds(r: Rect, frameW: number, frameH: number): boolean {
  return r.x >= 0 && r.y >= 0 && r.w > 0 && r.h > 0 &&
    r.x + r.w <= frameW && r.y + r.h <= frameH;
}
