"""HTTP inference API.

POST /v1/edit takes a base64 PNG image plus exactly one of a vector stroke
set or a base64 binary sketch, and returns the manipulated image (plus the
predicted mask and the pre-blend output when requested). The model handle
is immutable shared state, so concurrent requests are safe and identical
requests return identical image bytes.
"""

from __future__ import annotations

import base64
import binascii
import json
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from . import __version__
from .engine import ModelHandle, edit, load_model
from .imaging import StrokeSet, decode_gray_bytes, decode_image_bytes, encode_png

DEFAULT_MAX_IMAGE_SIDE = 2048


class EditOptions(BaseModel):
    return_mask: bool = False
    return_intermediate: bool = False


class EditRequestBody(BaseModel):
    image_b64: str
    strokes: dict | None = None
    sketch_b64: str | None = None
    options: EditOptions = Field(default_factory=EditOptions)


class EditResponseBody(BaseModel):
    result_b64: str
    mask_b64: str | None = None
    y1_b64: str | None = None
    timing_ms: float


def _b64_bytes(text: str, what: str) -> bytes:
    try:
        return base64.b64decode(text, validate=True)
    except (binascii.Error, ValueError):
        raise HTTPException(status_code=400, detail=f"{what} is not valid base64")


def create_app(handle: ModelHandle | None, max_image_side: int = DEFAULT_MAX_IMAGE_SIDE) -> FastAPI:
    app = FastAPI(title="sketchmend", version=__version__)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.handle = handle
    app.state.max_image_side = max_image_side

    @app.get("/v1/health")
    def health():
        return {
            "status": "ok",
            "model_loaded": app.state.handle is not None,
            "version": __version__,
        }

    @app.get("/v1/models")
    def list_models():
        current = app.state.handle
        entries = []
        if current is not None:
            folder = Path(current.path).parent
            for p in sorted(folder.glob("*.zip")):
                entries.append(
                    {"path": str(p), "loaded": str(p) == str(Path(current.path))}
                )
            if not any(e["loaded"] for e in entries):
                entries.append({"path": current.path, "loaded": True})
        return {"models": entries}

    @app.post("/v1/edit", response_model=EditResponseBody, response_model_exclude_none=True)
    def edit_endpoint(body: EditRequestBody):
        if app.state.handle is None:
            raise HTTPException(status_code=503, detail="no model loaded")
        if (body.strokes is None) == (body.sketch_b64 is None):
            raise HTTPException(status_code=400, detail="provide exactly one of strokes or sketch_b64")
        try:
            image = decode_image_bytes(_b64_bytes(body.image_b64, "image_b64"))
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e))
        if max(image.shape[:2]) > app.state.max_image_side:
            raise HTTPException(
                status_code=400,
                detail=f"image side exceeds limit {app.state.max_image_side}",
            )
        strokes = sketch = None
        if body.strokes is not None:
            try:
                strokes = StrokeSet.from_json(json.dumps(body.strokes))
            except (ValueError, KeyError, TypeError) as e:
                raise HTTPException(status_code=400, detail=f"bad strokes: {e}")
        else:
            try:
                sketch = decode_gray_bytes(_b64_bytes(body.sketch_b64, "sketch_b64"))
            except ValueError as e:
                raise HTTPException(status_code=422, detail=str(e))
            if sketch.shape[:2] != image.shape[:2]:
                raise HTTPException(status_code=400, detail="sketch dimensions differ from image")
            sketch = (sketch > 0.5).astype("float32")
        result = edit(
            app.state.handle,
            image,
            strokes=strokes,
            sketch=sketch,
            return_mask=body.options.return_mask,
            return_intermediate=body.options.return_intermediate,
        )
        return EditResponseBody(
            result_b64=base64.b64encode(encode_png(result.result)).decode("ascii"),
            mask_b64=(
                base64.b64encode(encode_png(result.mask)).decode("ascii")
                if result.mask is not None
                else None
            ),
            y1_b64=(
                base64.b64encode(encode_png(result.y1)).decode("ascii")
                if result.y1 is not None
                else None
            ),
            timing_ms=result.timing_ms,
        )

    return app


def serve(checkpoint, host: str = "127.0.0.1", port: int = 8008, max_image_side: int = DEFAULT_MAX_IMAGE_SIDE):
    """Blocking entry point used by the CLI."""
    import uvicorn

    handle = load_model(checkpoint)
    app = create_app(handle, max_image_side=max_image_side)
    uvicorn.run(app, host=host, port=port, log_level="info")
