/**
 * The UI preview rasterizer must agree with the server's rasterization on
 * the shared golden fixtures to within one pixel: every differing pixel
 * has to sit next to an agreeing set pixel (float tie-breaks at stroke
 * borders), and in practice the grids should be identical.
 */

import { readFileSync, readdirSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { rasterizeStrokes } from "../src/raster.js";
import { parseStrokeSet } from "../src/strokes.js";

const FIXTURE_DIR = join(dirname(fileURLToPath(import.meta.url)), "..", "..", "fixtures", "strokes");

interface Fixture {
  name: string;
  canvas: { height: number; width: number };
  strokeset: unknown;
  raster: string[];
}

function loadFixtures(): Fixture[] {
  return readdirSync(FIXTURE_DIR)
    .filter((f) => f.endsWith(".json"))
    .map((f) => JSON.parse(readFileSync(join(FIXTURE_DIR, f), "utf-8")) as Fixture);
}

function gridFromRows(rows: string[], width: number): Uint8Array {
  const out = new Uint8Array(rows.length * width);
  rows.forEach((row, y) => {
    for (let x = 0; x < width; x++) if (row[x] === "X") out[y * width + x] = 1;
  });
  return out;
}

function maxDisagreementDistance(a: Uint8Array, b: Uint8Array, h: number, w: number): number {
  // for each pixel where a and b differ, distance to the nearest pixel
  // where the OTHER grid is set; 0 when the grids are identical
  let worst = 0;
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      const i = y * w + x;
      if (a[i] === b[i]) continue;
      const target = a[i] ? b : a;
      let best = Infinity;
      for (let yy = 0; yy < h; yy++) {
        for (let xx = 0; xx < w; xx++) {
          if (target[yy * w + xx]) {
            best = Math.min(best, Math.hypot(xx - x, yy - y));
          }
        }
      }
      worst = Math.max(worst, best);
    }
  }
  return worst;
}

describe("preview rasterization vs server goldens", () => {
  const fixtures = loadFixtures();

  it("found the shared fixture set", () => {
    expect(fixtures.length).toBeGreaterThanOrEqual(5);
  });

  for (const fx of loadFixtures()) {
    it(`matches ${fx.name} within 1 px`, () => {
      const strokes = parseStrokeSet(JSON.stringify(fx.strokeset));
      const got = rasterizeStrokes(strokes, fx.canvas.height, fx.canvas.width);
      const want = gridFromRows(fx.raster, fx.canvas.width);
      expect(maxDisagreementDistance(got, want, fx.canvas.height, fx.canvas.width)).toBeLessThanOrEqual(1);
      // same algorithm, same floats: expect bit-equality too
      expect(Array.from(got)).toEqual(Array.from(want));
    });
  }

  it("empty stroke set gives an empty raster", () => {
    const grid = rasterizeStrokes([], 16, 16);
    expect(grid.every((v) => v === 0)).toBe(true);
  });

  it("composes by binary OR (duplicate strokes idempotent)", () => {
    const strokes = parseStrokeSet('{"strokes":[{"points":[[2,2],[12,12]],"width":2}]}');
    const once = rasterizeStrokes(strokes, 16, 16);
    const twice = rasterizeStrokes([...strokes, ...strokes], 16, 16);
    expect(Array.from(twice)).toEqual(Array.from(once));
  });
});
