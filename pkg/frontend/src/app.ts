/**
 * Browser sketching app: load an image, draw contours on top, submit to
 * the editing service, inspect the predicted mask, iterate, export.
 *
 * The base image is never mutated client-side; every edit comes back from
 * the service. At most one request is in flight at a time.
 */

import { buildEditRequest, checkHealth, submitEdit } from "./api.js";
import type { History } from "./history.js";
import { addStroke, canRedo, canUndo, currentStrokes, emptyHistory, redo, removeStrokes, undo } from "./history.js";
import { rasterizeStrokes, strokeTouchesMask } from "./raster.js";
import type { Stroke } from "./strokes.js";
import { makeStroke } from "./strokes.js";

type Tool = "draw" | "erase";

interface Session {
  imageB64: string | null; // PNG payload of the CURRENT input image
  width: number;
  height: number;
  history: History;
  lastResult: { resultB64: string; maskB64: string | null; timingMs: number } | null;
  pending: boolean;
}

const session: Session = {
  imageB64: null,
  width: 0,
  height: 0,
  history: emptyHistory(),
  lastResult: null,
  pending: false,
};

const brush = { tool: "draw" as Tool, width: 3, overlayOpacity: 0.8 };
let maskVisible = true;
let maskOpacity = 0.5;
let livePoints: Array<[number, number]> = [];

const $ = <T extends HTMLElement>(id: string): T => document.getElementById(id) as T;

function endpoint(): string {
  return ($("endpoint") as HTMLInputElement).value.trim() || "http://127.0.0.1:8008";
}

function banner(text: string, kind: "error" | "info" = "info"): void {
  const el = $("banner");
  el.textContent = text;
  el.className = text ? `banner ${kind}` : "banner hidden";
}

// -- canvas rendering --------------------------------------------------------

function paintBase(): void {
  const canvas = $("base") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!session.imageB64) return;
  const img = new Image();
  img.onload = () => ctx.drawImage(img, 0, 0);
  img.src = `data:image/png;base64,${session.imageB64}`;
}

function paintOverlay(): void {
  const canvas = $("overlay") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!session.imageB64) return;
  const strokes = [...currentStrokes(session.history)];
  if (livePoints.length > 0 && brush.tool === "draw") {
    strokes.push(makeStroke(livePoints, brush.width));
  }
  const mask = rasterizeStrokes(strokes, session.height, session.width);
  const image = ctx.createImageData(session.width, session.height);
  for (let i = 0; i < mask.length; i++) {
    if (mask[i]) {
      image.data[i * 4] = 16;
      image.data[i * 4 + 1] = 185;
      image.data[i * 4 + 2] = 129;
      image.data[i * 4 + 3] = Math.round(255 * brush.overlayOpacity);
    }
  }
  ctx.putImageData(image, 0, 0);
}

function paintResult(): void {
  const canvas = $("result") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!session.lastResult) return;
  const img = new Image();
  img.onload = () => {
    ctx.drawImage(img, 0, 0);
    if (maskVisible && session.lastResult?.maskB64) paintMaskHeat(ctx);
  };
  img.src = `data:image/png;base64,${session.lastResult.resultB64}`;
}

function paintMaskHeat(ctx: CanvasRenderingContext2D): void {
  const maskB64 = session.lastResult?.maskB64;
  if (!maskB64) return;
  const img = new Image();
  img.onload = () => {
    const off = document.createElement("canvas");
    off.width = session.width;
    off.height = session.height;
    const octx = off.getContext("2d")!;
    octx.drawImage(img, 0, 0);
    const data = octx.getImageData(0, 0, session.width, session.height);
    for (let i = 0; i < session.width * session.height; i++) {
      const value = data.data[i * 4]; // gray mask
      data.data[i * 4] = 255;
      data.data[i * 4 + 1] = 40;
      data.data[i * 4 + 2] = 40;
      data.data[i * 4 + 3] = Math.round(value * maskOpacity);
    }
    octx.putImageData(data, 0, 0);
    ctx.drawImage(off, 0, 0);
  };
  img.src = `data:image/png;base64,${maskB64}`;
}

function refresh(): void {
  paintBase();
  paintOverlay();
  paintResult();
  ($("undo") as HTMLButtonElement).disabled = !canUndo(session.history);
  ($("redo") as HTMLButtonElement).disabled = !canRedo(session.history);
  ($("submit") as HTMLButtonElement).disabled = session.pending || !session.imageB64;
  ($("use-result") as HTMLButtonElement).disabled = !session.lastResult;
  ($("export") as HTMLButtonElement).disabled = !session.lastResult;
  $("status").textContent = session.pending
    ? "editing…"
    : session.lastResult
      ? `last edit ${session.lastResult.timingMs.toFixed(0)} ms`
      : "";
}

// -- image loading -----------------------------------------------------------

function setCanvasSizes(): void {
  for (const id of ["base", "overlay", "result"]) {
    const canvas = $(id) as HTMLCanvasElement;
    canvas.width = session.width;
    canvas.height = session.height;
  }
}

async function loadImageFile(file: File): Promise<void> {
  const buf = new Uint8Array(await file.arrayBuffer());
  let binary = "";
  buf.forEach((b) => (binary += String.fromCharCode(b)));
  const b64 = btoa(binary);
  const img = new Image();
  img.onload = () => {
    session.width = img.naturalWidth;
    session.height = img.naturalHeight;
    // normalize any input format to PNG via canvas
    const off = document.createElement("canvas");
    off.width = session.width;
    off.height = session.height;
    off.getContext("2d")!.drawImage(img, 0, 0);
    session.imageB64 = off.toDataURL("image/png").split(",")[1];
    session.history = emptyHistory();
    session.lastResult = null;
    setCanvasSizes();
    banner("");
    refresh();
  };
  img.onerror = () => banner("cannot decode that file as an image", "error");
  img.src = `data:${file.type || "image/png"};base64,${b64}`;
}

// -- pointer handling ---------------------------------------------------------

function canvasPoint(ev: PointerEvent): [number, number] {
  const canvas = $("overlay") as HTMLCanvasElement;
  const rect = canvas.getBoundingClientRect();
  const x = ((ev.clientX - rect.left) / rect.width) * session.width;
  const y = ((ev.clientY - rect.top) / rect.height) * session.height;
  return [x, y];
}

function pointerDown(ev: PointerEvent): void {
  if (!session.imageB64) return;
  ($("overlay") as HTMLCanvasElement).setPointerCapture(ev.pointerId);
  livePoints = [canvasPoint(ev)];
  paintOverlay();
}

function pointerMove(ev: PointerEvent): void {
  if (livePoints.length === 0) return;
  livePoints.push(canvasPoint(ev));
  paintOverlay();
}

function pointerUp(): void {
  if (livePoints.length === 0) return;
  const stroke = makeStroke(livePoints, brush.width);
  livePoints = [];
  if (brush.tool === "draw") {
    session.history = addStroke(session.history, stroke);
  } else {
    const eraserMask = rasterizeStrokes([stroke], session.height, session.width);
    const hit = currentStrokes(session.history)
      .map((s, i) => (strokeTouchesMask(s, eraserMask, session.height, session.width) ? i : -1))
      .filter((i) => i >= 0);
    session.history = removeStrokes(session.history, hit);
  }
  refresh();
}

// -- actions -------------------------------------------------------------------

async function onSubmit(): Promise<void> {
  if (!session.imageB64 || session.pending) return;
  const strokes: Stroke[] = currentStrokes(session.history);
  if (strokes.length === 0) {
    banner("no strokes drawn — the output will be close to the input", "info");
  }
  session.pending = true;
  refresh();
  try {
    const body = buildEditRequest(session.imageB64, strokes, { return_mask: true });
    const reply = await submitEdit(endpoint(), body);
    session.lastResult = {
      resultB64: reply.result_b64,
      maskB64: reply.mask_b64 ?? null,
      timingMs: reply.timing_ms,
    };
    banner("");
  } catch (err) {
    banner(err instanceof Error ? err.message : String(err), "error");
  } finally {
    session.pending = false;
    refresh();
  }
}

function onUseResult(): void {
  if (!session.lastResult) return;
  session.imageB64 = session.lastResult.resultB64;
  session.history = emptyHistory();
  session.lastResult = null;
  refresh();
}

function onExport(): void {
  if (!session.lastResult) return;
  const a = document.createElement("a");
  a.href = `data:image/png;base64,${session.lastResult.resultB64}`;
  a.download = "sketchmend-result.png";
  a.click();
}

// -- wiring ---------------------------------------------------------------------

export function initApp(): void {
  const params = new URLSearchParams(window.location.search);
  if (params.get("endpoint")) ($("endpoint") as HTMLInputElement).value = params.get("endpoint")!;

  ($("file") as HTMLInputElement).addEventListener("change", (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (file) void loadImageFile(file);
  });
  const overlay = $("overlay") as HTMLCanvasElement;
  overlay.addEventListener("pointerdown", pointerDown);
  overlay.addEventListener("pointermove", pointerMove);
  overlay.addEventListener("pointerup", pointerUp);
  overlay.addEventListener("pointercancel", () => {
    livePoints = [];
    paintOverlay();
  });

  $("undo").addEventListener("click", () => {
    session.history = undo(session.history);
    refresh();
  });
  $("redo").addEventListener("click", () => {
    session.history = redo(session.history);
    refresh();
  });
  $("submit").addEventListener("click", () => void onSubmit());
  $("use-result").addEventListener("click", onUseResult);
  $("export").addEventListener("click", onExport);
  ($("tool-draw") as HTMLInputElement).addEventListener("change", () => (brush.tool = "draw"));
  ($("tool-erase") as HTMLInputElement).addEventListener("change", () => (brush.tool = "erase"));
  ($("brush-width") as HTMLInputElement).addEventListener("input", (ev) => {
    brush.width = Math.max(1, Number((ev.target as HTMLInputElement).value));
  });
  ($("overlay-opacity") as HTMLInputElement).addEventListener("input", (ev) => {
    brush.overlayOpacity = Number((ev.target as HTMLInputElement).value);
    paintOverlay();
  });
  ($("mask-toggle") as HTMLInputElement).addEventListener("change", (ev) => {
    maskVisible = (ev.target as HTMLInputElement).checked;
    paintResult();
  });
  ($("mask-opacity") as HTMLInputElement).addEventListener("input", (ev) => {
    maskOpacity = Number((ev.target as HTMLInputElement).value);
    paintResult();
  });
  $("check-health").addEventListener("click", () => {
    checkHealth(endpoint())
      .then((h) => banner(`service ok, model ${h.model_loaded ? "loaded" : "missing"} (v${h.version})`))
      .catch((e) => banner(String(e), "error"));
  });
  refresh();
}

if (typeof document !== "undefined" && document.getElementById("overlay")) {
  initApp();
}
