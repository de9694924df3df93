/**
 * Append-only stroke history with undo/redo.
 *
 * State is an operation log plus a cursor; the visible stroke list is a
 * pure replay of ops[0..cursor). Undo/redo only move the cursor, and a
 * fresh operation truncates the redo tail, so stroke ordering can never
 * be corrupted by any undo/redo sequence.
 */

import type { Stroke } from "./strokes.js";

export type Op =
  | { kind: "add"; stroke: Stroke }
  | { kind: "remove"; removed: Array<{ index: number; stroke: Stroke }> };

export interface History {
  ops: Op[];
  cursor: number;
}

export function emptyHistory(): History {
  return { ops: [], cursor: 0 };
}

export function currentStrokes(h: History): Stroke[] {
  const strokes: Stroke[] = [];
  for (let i = 0; i < h.cursor; i++) {
    const op = h.ops[i];
    if (op.kind === "add") {
      strokes.push(op.stroke);
    } else {
      // descending indices restore-safe removal
      for (const { index } of [...op.removed].sort((a, b) => b.index - a.index)) {
        strokes.splice(index, 1);
      }
    }
  }
  return strokes;
}

function push(h: History, op: Op): History {
  return { ops: [...h.ops.slice(0, h.cursor), op], cursor: h.cursor + 1 };
}

export function addStroke(h: History, stroke: Stroke): History {
  return push(h, { kind: "add", stroke });
}

/** Remove the strokes at `indices` (into the current stroke list). */
export function removeStrokes(h: History, indices: number[]): History {
  if (indices.length === 0) return h;
  const strokes = currentStrokes(h);
  const removed = [...new Set(indices)]
    .filter((i) => i >= 0 && i < strokes.length)
    .sort((a, b) => a - b)
    .map((index) => ({ index, stroke: strokes[index] }));
  if (removed.length === 0) return h;
  return push(h, { kind: "remove", removed });
}

export function canUndo(h: History): boolean {
  return h.cursor > 0;
}

export function canRedo(h: History): boolean {
  return h.cursor < h.ops.length;
}

export function undo(h: History): History {
  return canUndo(h) ? { ops: h.ops, cursor: h.cursor - 1 } : h;
}

export function redo(h: History): History {
  return canRedo(h) ? { ops: h.ops, cursor: h.cursor + 1 } : h;
}
