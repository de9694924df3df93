/**
 * Client-side stroke rasterization for the preview overlay.
 *
 * Mirrors the server: a pixel is set when its center lies within
 * width / 2 of any polyline segment (round caps fall out of the segment
 * distance), strokes compose by binary OR, no anti-aliasing. Keeping the
 * same rule keeps the preview within a pixel of what the server edits.
 */

import type { Stroke } from "./strokes.js";

export function rasterizeStrokes(strokes: readonly Stroke[], height: number, width: number): Uint8Array {
  const out = new Uint8Array(height * width);
  for (const stroke of strokes) {
    const radius = stroke.width / 2;
    const pts = stroke.points;
    if (pts.length === 1) segmentHits(out, height, width, pts[0], pts[0], radius);
    for (let i = 0; i + 1 < pts.length; i++) {
      segmentHits(out, height, width, pts[i], pts[i + 1], radius);
    }
  }
  return out;
}

function segmentHits(
  out: Uint8Array,
  height: number,
  width: number,
  p0: [number, number],
  p1: [number, number],
  radius: number,
): void {
  const [x0, y0] = p0;
  const [x1, y1] = p1;
  const xmin = Math.max(Math.floor(Math.min(x0, x1) - radius), 0);
  const xmax = Math.min(Math.ceil(Math.max(x0, x1) + radius), width - 1);
  const ymin = Math.max(Math.floor(Math.min(y0, y1) - radius), 0);
  const ymax = Math.min(Math.ceil(Math.max(y0, y1) + radius), height - 1);
  const dx = x1 - x0;
  const dy = y1 - y0;
  const len2 = dx * dx + dy * dy;
  const r2 = radius * radius;
  for (let py = ymin; py <= ymax; py++) {
    for (let px = xmin; px <= xmax; px++) {
      let t = 0;
      if (len2 > 0) {
        t = ((px - x0) * dx + (py - y0) * dy) / len2;
        t = Math.min(Math.max(t, 0), 1);
      }
      const ex = px - (x0 + t * dx);
      const ey = py - (y0 + t * dy);
      if (ex * ex + ey * ey <= r2) out[py * width + px] = 1;
    }
  }
}

/** True when some rasterized pixel of `stroke` is set in `mask`. */
export function strokeTouchesMask(stroke: Stroke, mask: Uint8Array, height: number, width: number): boolean {
  const own = rasterizeStrokes([stroke], height, width);
  for (let i = 0; i < own.length; i++) {
    if (own[i] && mask[i]) return true;
  }
  return false;
}
