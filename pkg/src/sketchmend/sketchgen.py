"""Surrogate sketches: classical edge extraction and region-limited sampling.

A training pair warps a random local region of an image and keeps the edge
contours of the *original* image inside that region as the sketch, so the
model learns to restore the indicated structure from a deteriorated input.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage as ndi

from .imaging import check_image
from .warp import (
    MeshError,
    RegionSpec,
    TriMesh,
    WarpConfig,
    apply_warp,
    build_mesh,
    make_warp_field,
    sample_region,
)

_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class EdgeConfig:
    """Hysteresis thresholds on gradient magnitude (per-pixel value units)
    and the Gaussian smoothing radius in pixels."""

    low: float = 0.1
    high: float = 0.2
    smoothing_radius: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.low <= self.high):
            raise ValueError(f"need 0 <= low <= high, got ({self.low}, {self.high})")
        if self.smoothing_radius < 0.0:
            raise ValueError("smoothing radius must be >= 0")


def _sobel(gray: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # /8 scales the 3x3 Sobel response so a unit-slope ramp reads as magnitude 1
    gx = ndi.sobel(gray, axis=1, mode="reflect") / 8.0
    gy = ndi.sobel(gray, axis=0, mode="reflect") / 8.0
    return gx, gy


def _nonmax_suppress(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Keep local maxima of `mag` along the quantized gradient direction.

    The comparison is strict on the backward neighbor and non-strict on the
    forward one, so a two-pixel plateau keeps exactly one pixel.
    """
    h, w = mag.shape
    padded = np.zeros((h + 2, w + 2), dtype=mag.dtype)
    padded[1:-1, 1:-1] = mag
    angle = np.mod(np.arctan2(gy, gx), np.pi)
    sector = np.floor((angle + np.pi / 8) / (np.pi / 4)).astype(int) % 4
    # sector 0: E-W, 1: NE-SW, 2: N-S, 3: NW-SE (screen coords, y down)
    offsets = [(0, 1), (1, 1), (1, 0), (1, -1)]
    keep = np.zeros_like(mag, dtype=bool)
    ys, xs = np.mgrid[1 : h + 1, 1 : w + 1]
    for s, (dy, dx) in enumerate(offsets):
        sel = sector == s
        fwd = padded[ys + dy, xs + dx]
        bwd = padded[ys - dy, xs - dx]
        keep |= sel & (mag >= fwd) & (mag > bwd)
    return np.where(keep, mag, 0.0)


def extract_edges(img: np.ndarray, cfg: EdgeConfig = EdgeConfig()) -> np.ndarray:
    """Binary contour map: smoothed luminance gradient, thinned by
    non-maximum suppression, linked by hysteresis thresholding."""
    check_image(img)
    gray = img @ _LUMA
    if cfg.smoothing_radius > 0:
        gray = ndi.gaussian_filter(gray, sigma=cfg.smoothing_radius, mode="reflect")
    gx, gy = _sobel(gray)
    mag = np.hypot(gx, gy)
    thin = _nonmax_suppress(mag, gx, gy)
    weak = thin >= cfg.low
    strong = thin >= cfg.high
    if not strong.any():
        return np.zeros_like(gray, dtype=np.float32)
    labels, _ = ndi.label(weak, structure=np.ones((3, 3), dtype=int))
    good = np.zeros(labels.max() + 1, dtype=bool)
    good[np.unique(labels[strong])] = True
    good[0] = False
    return good[labels].astype(np.float32)


def partial_sketch(edges: np.ndarray, region: RegionSpec) -> np.ndarray:
    """Keep edges inside the region, discard everything outside."""
    if edges.shape[:2] != (region.height, region.width):
        raise ValueError(f"edge map {edges.shape[:2]} does not match region canvas")
    return edges * region.raster_mask()


@dataclass(frozen=True)
class TrainingPair:
    """One self-supervision sample: a locally warped image plus the sketch
    of the original content inside the warped region."""

    x_warped: np.ndarray
    sketch: np.ndarray  # contours of the ORIGINAL image, region-cropped
    sketch_warped: np.ndarray  # same contours pushed through the warp
    field: np.ndarray
    region: RegionSpec
    mesh: TriMesh


@dataclass(frozen=True)
class PairConfig:
    warp: WarpConfig = WarpConfig()
    edge: EdgeConfig = EdgeConfig()
    min_sketch_px: int = 12
    region_tries: int = 10


def make_training_pair(
    x: np.ndarray,
    rng: np.random.Generator,
    cfg: PairConfig = PairConfig(),
    edges: np.ndarray | None = None,
) -> TrainingPair:
    """Sample a region (preferring ones that actually contain contours),
    warp the image inside it, and return the aligned sketch pair."""
    check_image(x)
    if edges is None:
        edges = extract_edges(x, cfg.edge)
    h, w = x.shape[:2]
    region = sample_region(h, w, rng, cfg.warp)
    sketch = partial_sketch(edges, region)
    for _ in range(cfg.region_tries - 1):
        if sketch.sum() >= cfg.min_sketch_px:
            break
        region = sample_region(h, w, rng, cfg.warp)
        sketch = partial_sketch(edges, region)

    n_interior = int(rng.integers(cfg.warp.n_interior[0], cfg.warp.n_interior[1] + 1))
    for _ in range(8):
        try:
            mesh = build_mesh(region, n_interior, rng)
            break
        except MeshError:
            # rare geometric degeneracy: draw a fresh region and carry on
            region = sample_region(h, w, rng, cfg.warp)
            sketch = partial_sketch(edges, region)
    else:
        mesh = build_mesh(region, n_interior, rng)
    angles = rng.uniform(0.0, 2 * np.pi, size=n_interior)
    radii = region.diagonal * rng.uniform(cfg.warp.min_disp_frac, cfg.warp.max_disp_frac, size=n_interior)
    disp = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    fieldarr = make_warp_field(mesh, disp)
    x_warped = apply_warp(fieldarr, x, mode="bilinear")
    sketch_warped = apply_warp(fieldarr, sketch, mode="nearest")
    return TrainingPair(
        x_warped=np.clip(x_warped, 0.0, 1.0),
        sketch=sketch,
        sketch_warped=sketch_warped,
        field=fieldarr,
        region=region,
        mesh=mesh,
    )
