"""Inference: load a checkpoint, run the mask→style→generate→blend pipeline.

Arbitrary input sizes are letterboxed to the model resolution and results
mapped back; the auxiliary decoder of the mask estimator never runs here.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import torch
from PIL import Image as PILImage

from . import ckpt
from .config import NetConfig
from .imaging import StrokeSet, check_image, rasterize_strokes, sketch_bbox_mask
from .networks import Discriminator, EditorModel


@dataclass(frozen=True)
class ModelHandle:
    """Immutable loaded model: safe to share across concurrent requests."""

    model: EditorModel
    config: NetConfig
    ablation: str
    step: int
    path: str


def load_model(path) -> ModelHandle:
    """Load a checkpoint into an eval-mode EditorModel."""
    manifest, arrays = ckpt.read_checkpoint(path)
    if not manifest.get("net_config"):
        raise ckpt.CheckpointError(f"checkpoint {path} carries no architecture config")
    cfg = NetConfig(**manifest["net_config"])
    model = EditorModel(cfg, manifest.get("ablation", "none"))
    ckpt.load_model_state(model, arrays, "model")
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return ModelHandle(model=model, config=cfg, ablation=model.ablation, step=manifest["step"], path=str(path))


@dataclass(frozen=True)
class EditOutputs:
    result: np.ndarray
    mask: np.ndarray
    y0: np.ndarray
    y1: np.ndarray


def _to_numpy_img(t: torch.Tensor) -> np.ndarray:
    return np.clip(t[0].permute(1, 2, 0).numpy(), 0.0, 1.0)


def run_pipeline(handle: ModelHandle, image: np.ndarray, sketch: np.ndarray) -> EditOutputs:
    """Edit an image already at model resolution with a binary sketch map."""
    model = handle.model
    r = handle.config.resolution
    if image.shape[:2] != (r, r) or sketch.shape[:2] != (r, r):
        raise ValueError(f"pipeline inputs must be {r}x{r}")
    x = torch.as_tensor(np.asarray(image, dtype=np.float32)).permute(2, 0, 1)[None]
    c = torch.as_tensor(np.asarray(sketch, dtype=np.float32))[None, None]
    with torch.no_grad():
        if handle.ablation == "no_mask":
            m = torch.ones_like(c)
        elif handle.ablation == "rule_mask":
            m = torch.as_tensor(sketch_bbox_mask(sketch))[None, None]
        else:
            m, _ = model.mask_estimator(x, c, with_aux=False)
        x_sty = m * x  # no dropout at inference
        v = model.style_vector(x_sty, m)
        v_hat = model.style_feature(v)
        x_sta = x if handle.ablation == "no_mask" else (1.0 - m) * x
        y0, y1 = model.generator(x_sta, m, c, v_hat)
        y = y1 if handle.ablation == "no_mask" else y1 * m + x * (1.0 - m)
    return EditOutputs(
        result=_to_numpy_img(y),
        mask=m[0, 0].numpy(),
        y0=_to_numpy_img(y0),
        y1=_to_numpy_img(y1),
    )


# ---------------------------------------------------------------------------
# letterboxing for arbitrary input sizes


@dataclass(frozen=True)
class Letterbox:
    """Geometry of an image placed into the square model canvas."""

    scale: float
    x_off: int
    y_off: int
    new_w: int
    new_h: int
    orig_w: int
    orig_h: int


def plan_letterbox(height: int, width: int, resolution: int) -> Letterbox:
    scale = resolution / max(height, width)
    new_w = max(int(round(width * scale)), 1)
    new_h = max(int(round(height * scale)), 1)
    return Letterbox(
        scale=scale,
        x_off=(resolution - new_w) // 2,
        y_off=(resolution - new_h) // 2,
        new_w=new_w,
        new_h=new_h,
        orig_w=width,
        orig_h=height,
    )


def letterbox_image(image: np.ndarray, box: Letterbox, resolution: int) -> np.ndarray:
    pil = PILImage.fromarray(np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8))
    resized = np.asarray(pil.resize((box.new_w, box.new_h), PILImage.BILINEAR), dtype=np.float32) / 255.0
    canvas = np.zeros((resolution, resolution, 3), dtype=np.float32)
    canvas[box.y_off : box.y_off + box.new_h, box.x_off : box.x_off + box.new_w] = resized
    return canvas


def unletterbox_map(arr: np.ndarray, box: Letterbox) -> np.ndarray:
    """Crop the model-resolution raster back out and resize to the original size."""
    crop = arr[box.y_off : box.y_off + box.new_h, box.x_off : box.x_off + box.new_w]
    mode = "RGB" if crop.ndim == 3 else "F"
    if crop.ndim == 3:
        pil = PILImage.fromarray(np.clip(np.rint(crop * 255.0), 0, 255).astype(np.uint8), mode)
        out = np.asarray(pil.resize((box.orig_w, box.orig_h), PILImage.BILINEAR), dtype=np.float32) / 255.0
    else:
        pil = PILImage.fromarray(crop.astype(np.float32), mode)
        out = np.asarray(pil.resize((box.orig_w, box.orig_h), PILImage.BILINEAR), dtype=np.float32)
    return out


def strokes_to_model_sketch(strokes: StrokeSet, box: Letterbox, resolution: int) -> np.ndarray:
    """Rasterize strokes directly in the letterboxed model frame."""
    from .imaging import Stroke

    mapped = []
    for s in strokes.strokes:
        pts = tuple((x * box.scale + box.x_off, y * box.scale + box.y_off) for x, y in s.points)
        mapped.append(Stroke(points=pts, width=max(s.width * box.scale, 1.0)))
    return rasterize_strokes(StrokeSet(tuple(mapped)), resolution, resolution)


@dataclass(frozen=True)
class EditResult:
    result: np.ndarray
    mask: np.ndarray | None
    y1: np.ndarray | None
    timing_ms: float


def edit(
    handle: ModelHandle,
    image: np.ndarray,
    strokes: StrokeSet | None = None,
    sketch: np.ndarray | None = None,
    return_mask: bool = False,
    return_intermediate: bool = False,
) -> EditResult:
    """Full inference entry point: exactly one of strokes / sketch drives the edit.

    The result always has the input image's dimensions. Pixels the mask
    leaves untouched stay within resampling error of the input.
    """
    started = time.perf_counter()
    check_image(image)
    if (strokes is None) == (sketch is None):
        raise ValueError("provide exactly one of strokes or sketch")
    h, w = image.shape[:2]
    r = handle.config.resolution
    box = plan_letterbox(h, w, r)
    x_model = letterbox_image(image, box, r)
    if strokes is not None:
        c_model = strokes_to_model_sketch(strokes, box, r)
    else:
        if sketch.shape[:2] != (h, w):
            raise ValueError(f"sketch {sketch.shape[:2]} does not match image {(h, w)}")
        canvas = np.zeros((r, r), dtype=np.float32)
        pil = PILImage.fromarray((np.asarray(sketch) > 0.5).astype(np.uint8) * 255, "L")
        resized = np.asarray(pil.resize((box.new_w, box.new_h), PILImage.NEAREST), dtype=np.float32) / 255.0
        canvas[box.y_off : box.y_off + box.new_h, box.x_off : box.x_off + box.new_w] = resized
        c_model = canvas
    out = run_pipeline(handle, x_model, c_model)
    if (h, w) == (r, r):
        result, mask, y1 = out.result, out.mask, out.y1
    else:
        result = unletterbox_map(out.result, box)
        mask = unletterbox_map(out.mask, box)
        y1 = unletterbox_map(out.y1, box)
    elapsed = (time.perf_counter() - started) * 1000.0
    return EditResult(
        result=result,
        mask=mask if return_mask else None,
        y1=y1 if return_intermediate else None,
        timing_ms=elapsed,
    )
