"""Triangular local warping used to deteriorate training inputs.

A random rectangular region strictly inside the image is triangulated
together with the image border; interior vertices are displaced while all
boundary vertices stay fixed, and the displacement is interpolated
barycentrically over each triangle to form a dense backward warp field.
Pixels outside the region are untouched, exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

from .imaging import DimensionMismatch, encode_png

_AREA_EPS = 1e-9


class MeshError(RuntimeError):
    """Raised when no valid triangulation can be built for a region."""


@dataclass(frozen=True)
class WarpConfig:
    """Knobs for the local warping augmentation (all in pixel units or fractions)."""

    area_frac: tuple[float, float] = (0.05, 0.25)
    n_interior: tuple[int, int] = (1, 4)
    max_disp_frac: float = 0.10  # of the region diagonal
    min_disp_frac: float = 0.0
    aspect: tuple[float, float] = (0.5, 2.0)

    def __post_init__(self):
        lo, hi = self.area_frac
        if not (0.0 < lo <= hi <= 0.5):
            raise ValueError(f"area fraction range must lie within (0, 0.5], got {self.area_frac}")
        if self.n_interior[0] < 1 or self.n_interior[0] > self.n_interior[1]:
            raise ValueError(f"bad interior vertex count range {self.n_interior}")
        if not (0.0 <= self.min_disp_frac <= self.max_disp_frac):
            raise ValueError("need 0 <= min_disp_frac <= max_disp_frac")


@dataclass(frozen=True)
class DropoutConfig:
    """Rectangle dropout of the style image: how many and how large."""

    count: tuple[int, int] = (0, 3)
    size_frac: tuple[float, float] = (0.10, 0.40)  # of the reference box sides


@dataclass(frozen=True)
class RegionSpec:
    """Axis-aligned rectangle in pixel coordinates, strictly inside the image."""

    x0: float
    y0: float
    x1: float
    y1: float
    height: int
    width: int

    def __post_init__(self):
        if not (1.0 <= self.x0 < self.x1 <= self.width - 2.0):
            raise ValueError(f"region x-range [{self.x0}, {self.x1}] leaves no border margin")
        if not (1.0 <= self.y0 < self.y1 <= self.height - 2.0):
            raise ValueError(f"region y-range [{self.y0}, {self.y1}] leaves no border margin")

    @property
    def area_fraction(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0) / float(self.width * self.height)

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.x1 - self.x0, self.y1 - self.y0))

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)

    def raster_mask(self) -> np.ndarray:
        """Binary (H, W) map of pixel centers inside the rectangle."""
        ys, xs = np.mgrid[0 : self.height, 0 : self.width]
        inside = (xs >= self.x0) & (xs <= self.x1) & (ys >= self.y0) & (ys <= self.y1)
        return inside.astype(np.float32)


def sample_region(height: int, width: int, rng: np.random.Generator, cfg: WarpConfig) -> RegionSpec:
    """Draw a rectangle with area fraction in cfg.area_frac, >= 1 px from the border."""
    lo, hi = cfg.area_frac
    for _ in range(64):
        frac = rng.uniform(lo, hi)
        aspect = rng.uniform(*cfg.aspect)
        area = frac * height * width
        w = float(np.sqrt(area * aspect))
        h = area / w
        if w > width - 3.0 or h > height - 3.0 or w < 2.0 or h < 2.0:
            continue
        x0 = rng.uniform(1.0, width - 2.0 - w)
        y0 = rng.uniform(1.0, height - 2.0 - h)
        return RegionSpec(x0, y0, x0 + w, y0 + h, height, width)
    raise MeshError(f"cannot fit a region with area fraction in {cfg.area_frac} into {height}x{width}")


@dataclass
class TriMesh:
    """Triangulation of the image domain with a designated displaceable subset.

    vertices: (N, 2) float (x, y); triangles: (T, 3) vertex indices;
    interior_idx: indices of vertices strictly inside the region (the only
    ones a warp field may displace).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    interior_idx: np.ndarray
    region: RegionSpec

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * np.abs(
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "vertices": self.vertices.tolist(),
                "triangles": self.triangles.tolist(),
                "interior_idx": self.interior_idx.tolist(),
                "region": list(self.region.bbox) + [self.region.height, self.region.width],
            }
        )


def _border_points(height: int, width: int) -> np.ndarray:
    """Image corners plus border points, spaced so outer triangles stay well shaped."""
    step = max(min(height, width) // 4, 4)
    xs = np.unique(np.r_[np.arange(0, width - 1, step), width - 1])
    ys = np.unique(np.r_[np.arange(0, height - 1, step), height - 1])
    pts = (
        [(float(x), 0.0) for x in xs]
        + [(float(x), float(height - 1)) for x in xs]
        + [(0.0, float(y)) for y in ys[1:-1]]
        + [(float(width - 1), float(y)) for y in ys[1:-1]]
    )
    return np.asarray(pts, dtype=np.float64)


def _rect_boundary_points(region: RegionSpec, spacing: float) -> np.ndarray:
    x0, y0, x1, y1 = region.bbox
    nx = max(int(np.ceil((x1 - x0) / spacing)), 1)
    ny = max(int(np.ceil((y1 - y0) / spacing)), 1)
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    pts = (
        [(float(x), y0) for x in xs]
        + [(float(x), y1) for x in xs]
        + [(x0, float(y)) for y in ys[1:-1]]
        + [(x1, float(y)) for y in ys[1:-1]]
    )
    return np.asarray(pts, dtype=np.float64)


def build_mesh(region: RegionSpec, n_interior: int, rng: np.random.Generator) -> TriMesh:
    """Triangulate the image with `n_interior` random vertices inside `region`.

    Retries interior placements until every triangle touching an interior
    vertex lies fully inside the region (so displacements cannot leak out)
    and no triangle is degenerate.
    """
    if n_interior < 1:
        raise ValueError("n_interior must be >= 1")
    x0, y0, x1, y1 = region.bbox
    rw, rh = x1 - x0, y1 - y0
    margin = max(min(rw, rh) * 0.18, 1.0)
    if x0 + margin >= x1 - margin or y0 + margin >= y1 - margin:
        raise MeshError(f"region {region.bbox} too small to host {n_interior} interior vertices")

    border = _border_points(region.height, region.width)
    # progressively densify the rect boundary: sparse edge points can let
    # Delaunay hook an interior vertex to an image-border vertex straight
    # through the rect edge, leaking displacement outside the region
    base_spacing = float(np.clip(min(rw, rh) / 2.0, 2.0, 8.0))
    for spacing in (base_spacing, base_spacing / 2.0, max(base_spacing / 4.0, 1.0)):
        rect = _rect_boundary_points(region, spacing)
        fixed = np.vstack([border, rect])
        n_fixed = len(fixed)
        region_point = np.zeros(n_fixed + n_interior, dtype=bool)
        region_point[len(border) :] = True  # rect boundary + interior

        for _ in range(16):
            inner = np.column_stack(
                [
                    rng.uniform(x0 + margin, x1 - margin, size=n_interior),
                    rng.uniform(y0 + margin, y1 - margin, size=n_interior),
                ]
            )
            vertices = np.vstack([fixed, inner])
            tri = Delaunay(vertices)
            mesh = TriMesh(
                vertices=vertices,
                triangles=tri.simplices.copy(),
                interior_idx=np.arange(n_fixed, n_fixed + n_interior),
                region=region,
            )
            if mesh.triangle_areas().min() <= _AREA_EPS:
                continue
            touches_interior = (mesh.triangles >= n_fixed).any(axis=1)
            if region_point[mesh.triangles[touches_interior]].all():
                return mesh
    raise MeshError(f"no valid triangulation for region {region.bbox} with {n_interior} interior vertices")


def make_warp_field(mesh: TriMesh, displacements: np.ndarray, max_norm: float | None = None) -> np.ndarray:
    """Barycentric interpolation of per-interior-vertex displacements.

    Returns an (H, W, 2) backward field (dx, dy); it equals the given
    displacement at each interior vertex, is linear over every triangle,
    and is exactly zero on triangles with no interior vertex. Displacement
    norms are clamped to `max_norm` (region diagonal when unset).
    """
    displacements = np.asarray(displacements, dtype=np.float64)
    if displacements.shape != (len(mesh.interior_idx), 2):
        raise ValueError(
            f"expected {len(mesh.interior_idx)} displacement pairs, got shape {displacements.shape}"
        )
    h, w = mesh.region.height, mesh.region.width
    norms = np.linalg.norm(displacements, axis=1)
    limit = mesh.region.diagonal if max_norm is None else float(max_norm)
    scale = np.where(norms > limit, limit / np.maximum(norms, 1e-12), 1.0)
    displacements = displacements * scale[:, None]

    vertex_disp = np.zeros((len(mesh.vertices), 2))
    vertex_disp[mesh.interior_idx] = displacements

    fieldarr = np.zeros((h, w, 2), dtype=np.float64)
    moving = set(mesh.interior_idx.tolist())
    for tri in mesh.triangles:
        if not (moving & set(tri.tolist())):
            continue  # zero displacement everywhere on this triangle
        p = mesh.vertices[tri]
        xmin = max(int(np.floor(p[:, 0].min())), 0)
        xmax = min(int(np.ceil(p[:, 0].max())), w - 1)
        ymin = max(int(np.floor(p[:, 1].min())), 0)
        ymax = min(int(np.ceil(p[:, 1].max())), h - 1)
        if xmin > xmax or ymin > ymax:
            continue
        ys, xs = np.mgrid[ymin : ymax + 1, xmin : xmax + 1]
        (ax, ay), (bx, by), (cx, cy) = p
        det = (by - cy) * (ax - cx) + (cx - bx) * (ay - cy)
        l1 = ((by - cy) * (xs - cx) + (cx - bx) * (ys - cy)) / det
        l2 = ((cy - ay) * (xs - cx) + (ax - cx) * (ys - cy)) / det
        l3 = 1.0 - l1 - l2
        inside = (l1 >= -1e-12) & (l2 >= -1e-12) & (l3 >= -1e-12)
        d = (
            l1[..., None] * vertex_disp[tri[0]]
            + l2[..., None] * vertex_disp[tri[1]]
            + l3[..., None] * vertex_disp[tri[2]]
        )
        sub = fieldarr[ymin : ymax + 1, xmin : xmax + 1]
        sub[inside] = d[inside]
    return fieldarr


def apply_warp(field: np.ndarray, raster: np.ndarray, mode: str = "bilinear") -> np.ndarray:
    """Backward-warp a raster: output(p) = input(p + field(p)).

    Source coordinates are clamped to the image bounds. `mode` is
    "bilinear" (images) or "nearest" (binary sketch maps stay binary).
    A zero field reproduces the input bit for bit.
    """
    raster = np.asarray(raster)
    if field.shape[:2] != raster.shape[:2]:
        raise DimensionMismatch(f"field {field.shape[:2]} vs raster {raster.shape[:2]}")
    if mode not in ("bilinear", "nearest"):
        raise ValueError(f"unknown interpolation mode {mode!r}")
    h, w = raster.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w]
    sx = np.clip(xs + field[:, :, 0], 0.0, w - 1.0)
    sy = np.clip(ys + field[:, :, 1], 0.0, h - 1.0)
    if mode == "nearest":
        xi = np.rint(sx).astype(np.intp)
        yi = np.rint(sy).astype(np.intp)
        return raster[yi, xi]
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0).astype(raster.dtype, copy=False)
    fy = (sy - y0).astype(raster.dtype, copy=False)
    if raster.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = raster[y0, x0] * (1.0 - fx) + raster[y0, x1] * fx
    bot = raster[y1, x0] * (1.0 - fx) + raster[y1, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    return out.astype(raster.dtype, copy=False)


def zero_rectangles(img: np.ndarray, rects: list[tuple[int, int, int, int]]) -> np.ndarray:
    """Return a copy of img with each (x0, y0, x1, y1) rectangle set to zero.

    Bounds are half-open pixel index ranges, clipped to the image.
    """
    out = np.array(img, copy=True)
    h, w = img.shape[:2]
    for x0, y0, x1, y1 in rects:
        out[max(y0, 0) : min(y1, h), max(x0, 0) : min(x1, w)] = 0.0
    return out


def sample_dropout_rects(
    shape: tuple[int, int],
    rng: np.random.Generator,
    cfg: DropoutConfig,
    bbox: tuple[float, float, float, float] | None = None,
) -> list[tuple[int, int, int, int]]:
    """Draw dropout rectangles sized relative to `bbox` (whole image if None)."""
    h, w = shape
    if bbox is None:
        bbox = (0.0, 0.0, float(w), float(h))
    bx0, by0, bx1, by1 = bbox
    bw, bh = bx1 - bx0, by1 - by0
    count = int(rng.integers(cfg.count[0], cfg.count[1] + 1))
    rects = []
    for _ in range(count):
        rw = max(int(round(rng.uniform(*cfg.size_frac) * bw)), 1)
        rh = max(int(round(rng.uniform(*cfg.size_frac) * bh)), 1)
        x0 = int(round(rng.uniform(bx0, max(bx1 - rw, bx0))))
        y0 = int(round(rng.uniform(by0, max(by1 - rh, by0))))
        rects.append((x0, y0, x0 + rw, y0 + rh))
    return rects


def regional_dropout(
    x_sty: np.ndarray,
    rng: np.random.Generator,
    cfg: DropoutConfig,
    bbox: tuple[float, float, float, float] | None = None,
) -> np.ndarray:
    """Zero out random rectangles of the style image; all other pixels unchanged."""
    return zero_rectangles(x_sty, sample_dropout_rects(x_sty.shape[:2], rng, cfg, bbox))


def dump_debug(mesh: TriMesh, fieldarr: np.ndarray, path_prefix) -> None:
    """Write <prefix>.json (mesh + field stats) and <prefix>.png (flow visualization)."""
    prefix = Path(path_prefix)
    mag = np.linalg.norm(fieldarr, axis=2)
    doc = json.loads(mesh.to_json())
    doc["field_max"] = float(mag.max())
    doc["field_mean"] = float(mag.mean())
    prefix.with_suffix(".json").write_text(json.dumps(doc))
    peak = max(mag.max(), 1e-6)
    angle = np.arctan2(fieldarr[:, :, 1], fieldarr[:, :, 0])
    hue = (angle + np.pi) / (2 * np.pi)
    val = mag / peak
    k = (hue * 6.0) % 6.0
    f = k - np.floor(k)
    sector = np.floor(k).astype(int) % 6
    c0, c1 = np.zeros_like(f), np.ones_like(f)
    r = np.choose(sector, [c1, 1 - f, c0, c0, f, c1])
    g = np.choose(sector, [f, c1, c1, 1 - f, c0, c0])
    b = np.choose(sector, [c0, c0, f, c1, c1, 1 - f])
    rgb = np.stack([r, g, b], axis=-1)
    prefix.with_suffix(".png").write_bytes(encode_png(rgb * val[..., None]))
