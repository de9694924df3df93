/**
 * Client for the editing service (POST /v1/edit, GET /v1/health).
 */

import type { Stroke } from "./strokes.js";
import { toStrokeSetJson } from "./strokes.js";

export interface EditOptions {
  return_mask: boolean;
  return_intermediate: boolean;
}

export interface EditRequestBody {
  image_b64: string;
  strokes: { strokes: Array<{ points: Array<[number, number]>; width: number }> };
  options: EditOptions;
}

export interface EditResponseBody {
  result_b64: string;
  mask_b64?: string;
  y1_b64?: string;
  timing_ms: number;
}

export function buildEditRequest(
  imageB64: string,
  strokes: readonly Stroke[],
  options: Partial<EditOptions> = {},
): EditRequestBody {
  return {
    image_b64: imageB64,
    strokes: toStrokeSetJson(strokes),
    options: { return_mask: true, return_intermediate: false, ...options },
  };
}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(`service error ${status}: ${detail}`);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export async function submitEdit(
  endpoint: string,
  body: EditRequestBody,
  fetchImpl: FetchLike = fetch,
): Promise<EditResponseBody> {
  const resp = await fetchImpl(`${endpoint.replace(/\/$/, "")}/v1/edit`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const doc = await resp.json();
      detail = typeof doc.detail === "string" ? doc.detail : JSON.stringify(doc);
    } catch {
      /* non-JSON error body */
    }
    throw new ServiceError(resp.status, detail);
  }
  const doc = (await resp.json()) as EditResponseBody;
  if (typeof doc.result_b64 !== "string" || doc.result_b64.length === 0) {
    throw new ServiceError(502, "malformed service reply: missing result_b64");
  }
  return doc;
}

export async function checkHealth(
  endpoint: string,
  fetchImpl: FetchLike = fetch,
): Promise<{ status: string; model_loaded: boolean; version: string }> {
  const resp = await fetchImpl(`${endpoint.replace(/\/$/, "")}/v1/health`);
  if (!resp.ok) throw new ServiceError(resp.status, resp.statusText);
  return resp.json();
}
