"""Procedural colored-polygon images for desk-scale experiments.

Each image is a flat background with a few filled convex-ish polygons and
ellipses whose luminance is pushed away from the background, so classical
edge detection yields clean closed contours to sketch from.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image as PILImage, ImageDraw

from .imaging import save_image


# Luminance separation between shapes and background. The edge detector's
# strong threshold (0.2) needs roughly 0.63 contrast after sigma-1 smoothing,
# so 0.65 keeps every shape contour reliably detectable.
_MIN_LUM_SEP = 0.65


def _luminance(c) -> float:
    return float(np.dot(c, (0.299, 0.587, 0.114))) / 255.0


def _random_color(rng: np.random.Generator, away_from: float | None = None) -> tuple:
    """Uniform 8-bit RGB color, optionally with luminance far from `away_from`."""
    for _ in range(256):
        c = rng.integers(0, 256, size=3)
        if away_from is None or abs(_luminance(c) - away_from) >= _MIN_LUM_SEP:
            return tuple(int(v) for v in c)
    return (0, 0, 0) if (away_from or 0.0) > 0.5 else (255, 255, 255)


def _background_color(rng: np.random.Generator) -> tuple:
    """A color dark or light enough that contrasting shape colors exist."""
    while True:
        c = rng.integers(0, 256, size=3)
        lum = _luminance(c)
        if lum <= 1.0 - _MIN_LUM_SEP - 0.05 or lum >= _MIN_LUM_SEP + 0.05:
            return tuple(int(v) for v in c)


def _polygon_points(rng: np.random.Generator, size: int) -> list[tuple[float, float]]:
    cx = rng.uniform(0.2, 0.8) * size
    cy = rng.uniform(0.2, 0.8) * size
    n = int(rng.integers(3, 8))
    base_r = rng.uniform(0.10, 0.30) * size
    angles = np.sort(rng.uniform(0.0, 2 * np.pi, size=n))
    radii = base_r * rng.uniform(0.6, 1.3, size=n)
    return [(cx + r * np.cos(a), cy + r * np.sin(a)) for r, a in zip(radii, angles)]


def _shading_field(rng: np.random.Generator, size: int) -> np.ndarray:
    """Mild low-frequency sinusoidal shading. Its gradient stays far below
    the edge detector's weak threshold, so sketches remain clean shape
    contours; it mainly stops a local warp from being a free no-op on flat
    fills while staying easy to re-synthesize."""
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float32)
    field = np.zeros((size, size), dtype=np.float32)
    for _ in range(2):
        amp = rng.uniform(0.03, 0.05)
        lam = rng.uniform(10.0, 16.0)
        theta = rng.uniform(0.0, np.pi)
        phase = rng.uniform(0.0, 2 * np.pi)
        field += amp * np.sin(2 * np.pi * (xs * np.cos(theta) + ys * np.sin(theta)) / lam + phase)
    return field


def generate_image(rng: np.random.Generator, size: int = 64) -> tuple[np.ndarray, int]:
    """One shaded polygon scene; returns (image, shape count), shapes in [2, 5].

    Without the shading texture, a local warp changes almost nothing away
    from shape boundaries and the self-supervision collapses to an identity
    shortcut; with it, warps damage whole patches.
    """
    bg = _background_color(rng)
    bg_lum = _luminance(bg)
    canvas = PILImage.new("RGB", (size, size), bg)
    draw = ImageDraw.Draw(canvas)
    n_shapes = int(rng.integers(2, 6))
    for _ in range(n_shapes):
        color = _random_color(rng, away_from=bg_lum)
        if rng.random() < 0.25:
            cx, cy = rng.uniform(0.2, 0.8, size=2) * size
            rx, ry = rng.uniform(0.08, 0.25, size=2) * size
            draw.ellipse([cx - rx, cy - ry, cx + rx, cy + ry], fill=color)
        else:
            draw.polygon([(float(x), float(y)) for x, y in _polygon_points(rng, size)], fill=color)
    arr = np.asarray(canvas, dtype=np.float32) / 255.0
    arr = np.clip(arr + _shading_field(rng, size)[:, :, None], 0.0, 1.0)
    return arr, n_shapes


def write_dataset(out_dir, count: int, seed: int, size: int = 64) -> dict:
    """Write `count` PNGs plus a manifest.json; deterministic per seed."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    files, labels = [], []
    for i in range(count):
        img, n_shapes = generate_image(rng, size=size)
        name = f"toy_{i:05d}.png"
        save_image(img, out / name)
        files.append(name)
        labels.append(n_shapes)
    manifest = {"seed": seed, "size": size, "count": count, "files": files, "labels": labels}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return manifest


def load_dataset(data_dir) -> np.ndarray:
    """Load every PNG listed in manifest.json (or all PNGs) as one (N, H, W, 3) array."""
    from .imaging import load_image

    root = Path(data_dir)
    manifest = root / "manifest.json"
    if manifest.exists():
        names = json.loads(manifest.read_text())["files"]
    else:
        names = sorted(p.name for p in root.glob("*.png"))
    if not names:
        raise FileNotFoundError(f"no images found under {root}")
    return np.stack([load_image(root / n) for n in names])
