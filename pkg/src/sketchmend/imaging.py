"""Raster primitives: partial images, blending, stroke rasterization, file I/O.

Conventions used across the package:

* images are float arrays of shape (H, W, 3) with values in [0, 1],
  channel-last, row-major, origin at the top-left;
* sketch maps and masks are (H, W) float arrays in [0, 1] (a sketch is
  binary once thresholded);
* point coordinates are (x, y) in pixel units, x along columns, with
  pixel centers at integer coordinates.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

MIN_SIDE = 8


class DimensionMismatch(ValueError):
    """Raised when rasters that must share a spatial size do not."""


def check_image(x: np.ndarray) -> np.ndarray:
    """Validate an (H, W, 3) image in [0, 1] and return it unchanged."""
    x = np.asarray(x)
    if x.ndim != 3 or x.shape[2] != 3:
        raise ValueError(f"image must be (H, W, 3), got {x.shape}")
    if x.shape[0] < MIN_SIDE or x.shape[1] < MIN_SIDE:
        raise ValueError(f"image sides must be >= {MIN_SIDE}, got {x.shape[:2]}")
    if not np.isfinite(x).all():
        raise ValueError("image contains non-finite values")
    if x.min() < 0.0 or x.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    return x


def check_map(m: np.ndarray, *, binary: bool = False) -> np.ndarray:
    """Validate an (H, W) map in [0, 1]; optionally require {0, 1} values."""
    m = np.asarray(m)
    if m.ndim == 3 and m.shape[2] == 1:
        m = m[:, :, 0]
    if m.ndim != 2:
        raise ValueError(f"map must be (H, W), got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError("map contains non-finite values")
    if m.min() < 0.0 or m.max() > 1.0:
        raise ValueError("map values must lie in [0, 1]")
    if binary and not np.isin(m, (0.0, 1.0)).all():
        raise ValueError("map is not binary")
    return m


def _require_same_size(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[:2] != b.shape[:2]:
        raise DimensionMismatch(f"spatial sizes differ: {a.shape[:2]} vs {b.shape[:2]}")


def style_partial(x: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Appearance of the modification region: m ⊙ x, per channel."""
    _require_same_size(x, m)
    return m[:, :, None] * x


def static_partial(x: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Preserved part of the input: (1 - m) ⊙ x, per channel."""
    _require_same_size(x, m)
    return (1.0 - m)[:, :, None] * x


def blend(y1: np.ndarray, x: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Composite synthesized content into the input: y1 ⊙ m + x ⊙ (1 - m)."""
    _require_same_size(y1, x)
    _require_same_size(x, m)
    mm = m[:, :, None] if y1.ndim == 3 else m
    return y1 * mm + x * (1.0 - mm)


def sketch_bbox_mask(c: np.ndarray) -> np.ndarray:
    """Rule-based mask: the minimum axis-aligned bounding box of the sketch.

    An empty sketch yields an all-zero mask.
    """
    c = check_map(c)
    out = np.zeros(c.shape, dtype=np.float32)
    ys, xs = np.nonzero(c > 0.5)
    if len(ys):
        out[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1] = 1.0
    return out


# ---------------------------------------------------------------------------
# strokes


@dataclass(frozen=True)
class Stroke:
    """A polyline in pixel coordinates with a brush width in pixels."""

    points: tuple[tuple[float, float], ...]
    width: float = 2.0

    def __post_init__(self):
        if len(self.points) < 1:
            raise ValueError("a stroke needs at least one point")
        if self.width < 1.0:
            raise ValueError("stroke width must be >= 1 px")


@dataclass(frozen=True)
class StrokeSet:
    """An ordered collection of strokes, as drawn in the UI."""

    strokes: tuple[Stroke, ...] = ()

    def to_json(self) -> str:
        return json.dumps(
            {
                "strokes": [
                    {"points": [[float(x), float(y)] for x, y in s.points], "width": float(s.width)}
                    for s in self.strokes
                ]
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "StrokeSet":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValueError(f"invalid stroke JSON: {e}") from e
        if not isinstance(doc, dict) or "strokes" not in doc:
            raise ValueError("stroke JSON must be an object with a 'strokes' list")
        strokes = []
        for entry in doc["strokes"]:
            pts = tuple((float(p[0]), float(p[1])) for p in entry["points"])
            strokes.append(Stroke(points=pts, width=float(entry.get("width", 2.0))))
        return cls(strokes=tuple(strokes))


def _segment_hits(out: np.ndarray, p0, p1, radius: float) -> None:
    """Mark pixels whose center lies within `radius` of segment p0-p1."""
    h, w = out.shape
    x0, y0 = p0
    x1, y1 = p1
    xmin = max(int(np.floor(min(x0, x1) - radius)), 0)
    xmax = min(int(np.ceil(max(x0, x1) + radius)), w - 1)
    ymin = max(int(np.floor(min(y0, y1) - radius)), 0)
    ymax = min(int(np.ceil(max(y0, y1) + radius)), h - 1)
    if xmin > xmax or ymin > ymax:
        return
    ys, xs = np.mgrid[ymin : ymax + 1, xmin : xmax + 1]
    dx, dy = x1 - x0, y1 - y0
    seg_len2 = dx * dx + dy * dy
    if seg_len2 == 0.0:
        t = 0.0
    else:
        t = np.clip(((xs - x0) * dx + (ys - y0) * dy) / seg_len2, 0.0, 1.0)
    dist2 = (xs - (x0 + t * dx)) ** 2 + (ys - (y0 + t * dy)) ** 2
    out[ymin : ymax + 1, xmin : xmax + 1] |= dist2 <= radius * radius


def rasterize_strokes(strokes: StrokeSet, height: int, width: int) -> np.ndarray:
    """Render strokes to a binary (H, W) sketch map.

    Segments are drawn with round caps by thresholding the exact distance
    from each pixel center to the segment at width / 2; strokes compose by
    binary OR and no anti-aliasing is applied, so any renderer following
    the same rule reproduces the map bit for bit.
    """
    if height < MIN_SIDE or width < MIN_SIDE:
        raise ValueError(f"canvas sides must be >= {MIN_SIDE}")
    hit = np.zeros((height, width), dtype=bool)
    for stroke in strokes.strokes:
        radius = stroke.width / 2.0
        pts = stroke.points
        if len(pts) == 1:
            _segment_hits(hit, pts[0], pts[0], radius)
        for a, b in zip(pts[:-1], pts[1:]):
            _segment_hits(hit, a, b, radius)
    return hit.astype(np.float32)


# ---------------------------------------------------------------------------
# file and byte-level I/O (PNG / JPEG in, 8-bit PNG out)


def load_image(path) -> np.ndarray:
    """Read a PNG/JPEG file into a float32 (H, W, 3) image in [0, 1]."""
    try:
        with PILImage.open(path) as im:
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float32) / 255.0
    except FileNotFoundError:
        raise
    except Exception as e:
        raise ValueError(f"cannot decode image file {path}: {e}") from e
    return check_image(arr)


def to_uint8(x: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(x) * 255.0), 0, 255).astype(np.uint8)


def save_image(img: np.ndarray, path) -> None:
    """Write an image as 8-bit RGB PNG (lossless up to 1/255 quantization)."""
    check_image(img)
    PILImage.fromarray(to_uint8(img), mode="RGB").save(Path(path), format="PNG")


def encode_png(img: np.ndarray) -> bytes:
    """Encode an (H, W, 3) image or an (H, W) gray map as PNG bytes."""
    arr = to_uint8(img)
    mode = "RGB" if arr.ndim == 3 else "L"
    buf = io.BytesIO()
    PILImage.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def decode_image_bytes(data: bytes) -> np.ndarray:
    """Decode PNG/JPEG bytes into a float32 (H, W, 3) image in [0, 1]."""
    try:
        with PILImage.open(io.BytesIO(data)) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    except Exception as e:
        raise ValueError(f"cannot decode image payload: {e}") from e
    return check_image(arr)


def decode_gray_bytes(data: bytes) -> np.ndarray:
    """Decode image bytes into a float32 (H, W) map in [0, 1]."""
    try:
        with PILImage.open(io.BytesIO(data)) as im:
            arr = np.asarray(im.convert("L"), dtype=np.float32) / 255.0
    except Exception as e:
        raise ValueError(f"cannot decode gray payload: {e}") from e
    return arr
