"""Held-out evaluation: synthetic warped pairs, pixel and feature metrics,
mask-quality diagnostics, and a side-by-side method table.

The synthetic protocol mirrors training: sample a region per test image,
keep original contours inside it as the sketch, warp locally, then score
the model's reconstruction against the untouched original.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage as ndi

from .config import RunConfig
from .engine import ModelHandle, run_pipeline
from .metrics import fid, l1_error, psnr, ssim, style_loss
from .features import image_set_stats
from .sketchgen import PairConfig, make_training_pair

MASK_THRESHOLD = 0.5
LOCALITY_RADIUS_PX = 9.0


@dataclass(frozen=True)
class EvalPair:
    x: np.ndarray
    x_warped: np.ndarray
    sketch: np.ndarray
    region_mask: np.ndarray


def build_eval_pairs(images: np.ndarray, seed: int, cfg: RunConfig) -> list[EvalPair]:
    """Deterministic synthetic pairs from held-out images."""
    rng = np.random.default_rng(seed)
    pair_cfg = PairConfig(warp=cfg.warp, edge=cfg.edge, min_sketch_px=cfg.train.min_sketch_px)
    pairs = []
    for x in images:
        p = make_training_pair(x, rng, pair_cfg)
        pairs.append(
            EvalPair(x=x, x_warped=p.x_warped, sketch=p.sketch, region_mask=p.region.raster_mask())
        )
    return pairs


def _mask_iou(mask: np.ndarray, region: np.ndarray) -> float:
    pred = mask >= MASK_THRESHOLD
    truth = region >= 0.5
    union = np.logical_or(pred, truth).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(pred, truth).sum() / union)


def _off_sketch_activation(mask: np.ndarray, sketch: np.ndarray) -> float:
    """Mean mask value outside a LOCALITY_RADIUS_PX dilation of the sketch."""
    if sketch.max() <= 0:
        return float(mask.mean())
    dist = ndi.distance_transform_edt(sketch <= 0.5)
    outside = dist > LOCALITY_RADIUS_PX
    if not outside.any():
        return 0.0
    return float(mask[outside].mean())


def evaluate_pairs(handle: ModelHandle, pairs: list[EvalPair], extractor=None) -> dict:
    """Score reconstructions of warped inputs against the originals.

    Adds mask diagnostics: IoU of the thresholded mask against the true
    warped region when the *unwarped* image is the input (generalization),
    and mean mask activation far from the sketch (locality).
    """
    l1s, psnrs, ssims, ious, locality = [], [], [], [], []
    results, sls = [], []
    for pair in pairs:
        out = run_pipeline(handle, pair.x_warped, pair.sketch)
        l1s.append(l1_error(out.result, pair.x))
        psnrs.append(psnr(out.result, pair.x))
        ssims.append(ssim(out.result, pair.x))
        locality.append(_off_sketch_activation(out.mask, pair.sketch))
        results.append(out.result)
        clean = run_pipeline(handle, pair.x, pair.sketch)
        ious.append(_mask_iou(clean.mask, pair.region_mask))
        if extractor is not None:
            sls.append(style_loss(pair.x, out.result, extractor))
    report = {
        "l1": float(np.mean(l1s)),
        "psnr": float(np.mean(psnrs)),
        "ssim": float(np.mean(ssims)),
        "mask_iou_unwarped": float(np.mean(ious)),
        "mask_off_sketch": float(np.mean(locality)),
        "count": len(pairs),
    }
    if extractor is not None:
        report["fid"] = fid(
            image_set_stats([p.x for p in pairs], extractor),
            image_set_stats(results, extractor),
        )
        report["sl1"] = float(np.mean([s["sl1"] for s in sls]))
        report["sl2"] = float(np.mean([s["sl2"] for s in sls]))
    return report


def empty_sketch_report(handle: ModelHandle, images: np.ndarray) -> dict:
    """Identity behavior on clean images with an all-zero sketch."""
    r = handle.config.resolution
    blank = np.zeros((r, r), dtype=np.float32)
    masks, diffs = [], []
    for x in images:
        out = run_pipeline(handle, x, blank)
        masks.append(float(out.mask.mean()))
        diffs.append(l1_error(out.result, x))
    return {"mean_mask": float(np.mean(masks)), "mean_abs_diff": float(np.mean(diffs)), "count": len(images)}


_COLUMNS = ("l1", "psnr", "ssim", "fid", "sl1", "sl2")


def render_table(reports: dict[str, dict]) -> str:
    """Fixed-width comparison table, one row per method."""
    header = f"{'Method':<18}" + "".join(f"{c.upper():>12}" for c in _COLUMNS)
    lines = [header, "-" * len(header)]
    for name, rep in reports.items():
        cells = []
        for c in _COLUMNS:
            v = rep.get(c)
            cells.append(f"{v:>12.4f}" if v is not None else f"{'-':>12}")
        lines.append(f"{name:<18}" + "".join(cells))
    return "\n".join(lines)


def write_report(path, reports: dict[str, dict]) -> None:
    """Atomic JSON dump of {method: report}."""
    from pathlib import Path

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(reports, indent=1, sort_keys=True))
    tmp.replace(path)
