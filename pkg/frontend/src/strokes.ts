/**
 * Stroke model and the wire schema shared with the editing service.
 *
 * The service owns rasterization; strokes always travel as vector
 * polylines in image pixel coordinates (origin top-left, x along columns,
 * pixel centers at integer coordinates).
 */

export interface Stroke {
  /** Polyline points as [x, y] pairs in image pixels. */
  points: Array<[number, number]>;
  /** Brush width in pixels, >= 1. */
  width: number;
}

export interface StrokeSetJson {
  strokes: Array<{ points: Array<[number, number]>; width: number }>;
}

export function makeStroke(points: Array<[number, number]>, width: number): Stroke {
  if (points.length < 1) throw new Error("a stroke needs at least one point");
  if (width < 1) throw new Error("stroke width must be >= 1 px");
  return { points: points.map(([x, y]) => [x, y]), width };
}

/** Serialize to the exact JSON shape the service expects. */
export function toStrokeSetJson(strokes: readonly Stroke[]): StrokeSetJson {
  return {
    strokes: strokes.map((s) => ({
      points: s.points.map(([x, y]) => [x, y] as [number, number]),
      width: s.width,
    })),
  };
}

export function serializeStrokes(strokes: readonly Stroke[]): string {
  return JSON.stringify(toStrokeSetJson(strokes));
}

export function parseStrokeSet(text: string): Stroke[] {
  const doc = JSON.parse(text) as StrokeSetJson;
  if (!doc || !Array.isArray(doc.strokes)) throw new Error("not a StrokeSet document");
  return doc.strokes.map((s) => makeStroke(s.points, s.width));
}
