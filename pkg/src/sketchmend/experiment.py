"""Desk-scale toy experiment: train the model variants on procedural
polygon images and score them on held-out synthetic pairs.

Variants: the full model, the same without bi-directional mask
regularization, and the three architecture ablations (no mask estimator,
rule-based bounding-box mask, no style encoder). Finished runs leave a
`done.json` marker keyed by a config hash so re-runs are incremental.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig, apply_overrides
from .engine import load_model
from .evaluation import (
    build_eval_pairs,
    empty_sketch_report,
    evaluate_pairs,
    render_table,
    write_report,
)
from .features import StubFeatureExtractor, TinyConvFeatureExtractor
from .toydata import load_dataset, write_dataset
from .training import run_training

VARIANT_OVERRIDES: dict[str, list[str]] = {
    "full": [],
    "no_bmr": ["weights.w_bmr=0"],
    "no_mask": ["train.ablation=no_mask"],
    "rule_mask": ["train.ablation=rule_mask"],
    "no_style": ["train.ablation=no_style"],
}

# Warps must visibly damage the region or the trivial all-zero-mask solution
# wins (undoing a 2 px warp is cheaper than repainting): displacements are
# a large fraction of the region diagonal with a floor, so every training
# pair genuinely requires mask-guided reconstruction.
TOY_OVERRIDES = [
    "net.base_width=16",
    "net.style_dim=64",
    "optim.lr_g=0.0004",
    "optim.lr_d=0.0002",
    "train.ckpt_every=500",
    "train.mask_warmup=3500",
    "train.warmup_gan=false",
    "warp.max_disp_frac=0.55",
    "warp.min_disp_frac=0.25",
    "warp.n_interior=2, 5",
    "warp.area_frac=0.08, 0.25",
]


@dataclass(frozen=True)
class ExperimentSpec:
    out_dir: str
    steps_main: int = 3000
    steps_ablation: int = 1000
    train_count: int = 2000
    eval_count: int = 200
    seed: int = 0
    size: int = 64
    extractor: str = "tiny"  # "tiny" (fit on toy data) or "stub"
    extra_overrides: tuple[str, ...] = ()


def toy_config(spec: ExperimentSpec, variant: str) -> RunConfig:
    steps = spec.steps_main if variant in ("full", "no_bmr") else spec.steps_ablation
    overrides = (
        TOY_OVERRIDES
        + [f"train.steps={steps}", f"train.seed={spec.seed}", f"net.resolution={spec.size}"]
        + VARIANT_OVERRIDES[variant]
        + list(spec.extra_overrides)
    )
    cfg = apply_overrides(RunConfig(), overrides)
    if cfg.train.mask_warmup >= steps:  # short runs keep a proportional warmup
        cfg = apply_overrides(cfg, [f"train.mask_warmup={steps // 2}"])
    return cfg


def _config_hash(cfg: RunConfig) -> str:
    from .config import dump_config

    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()[:16]


def ensure_datasets(spec: ExperimentSpec) -> tuple[np.ndarray, np.ndarray]:
    """Generate (or reuse) the train and held-out toy datasets."""
    root = Path(spec.out_dir)
    train_dir = root / "data" / "train"
    eval_dir = root / "data" / "heldout"
    if not (train_dir / "manifest.json").exists():
        write_dataset(train_dir, count=spec.train_count, seed=spec.seed, size=spec.size)
    if not (eval_dir / "manifest.json").exists():
        write_dataset(eval_dir, count=spec.eval_count, seed=spec.seed + 1_000_003, size=spec.size)
    return load_dataset(train_dir), load_dataset(eval_dir)


def train_variant(spec: ExperimentSpec, variant: str, images: np.ndarray, log_stream=None) -> Path:
    """Train one variant (idempotent); returns the checkpoint path."""
    cfg = toy_config(spec, variant)
    run_dir = Path(spec.out_dir) / "runs" / variant
    ckpt_path = run_dir / "ckpt_latest.zip"
    marker = run_dir / "done.json"
    want = {"config_hash": _config_hash(cfg), "steps": cfg.train.steps}
    if marker.exists() and ckpt_path.exists():
        have = json.loads(marker.read_text())
        if all(have.get(k) == v for k, v in want.items()):
            return ckpt_path
    started = time.time()
    run_training(cfg, images, run_dir, log_stream=log_stream)
    want["wall_seconds"] = time.time() - started
    marker.write_text(json.dumps(want))
    return ckpt_path


def _make_extractor(spec: ExperimentSpec, train_images: np.ndarray):
    if spec.extractor == "stub":
        return StubFeatureExtractor()
    cache = Path(spec.out_dir) / "feature_extractor.npz"
    if cache.exists():
        return TinyConvFeatureExtractor.load(cache)
    manifest = json.loads((Path(spec.out_dir) / "data" / "train" / "manifest.json").read_text())
    labels = np.asarray(manifest["labels"]) - min(manifest["labels"])
    ex = TinyConvFeatureExtractor.fit(train_images, labels, steps=300, seed=spec.seed)
    ex.save(cache)
    return ex


def evaluate_variant(spec: ExperimentSpec, variant: str, eval_images: np.ndarray, extractor) -> dict:
    cfg = toy_config(spec, variant)
    handle = load_model(Path(spec.out_dir) / "runs" / variant / "ckpt_latest.zip")
    pairs = build_eval_pairs(eval_images, seed=spec.seed + 99, cfg=cfg)
    report = evaluate_pairs(handle, pairs, extractor=extractor)
    report["empty_sketch"] = empty_sketch_report(handle, eval_images)
    marker = Path(spec.out_dir) / "runs" / variant / "done.json"
    if marker.exists():
        report["train_wall_seconds"] = json.loads(marker.read_text()).get("wall_seconds")
    return report


def run_experiment(spec: ExperimentSpec, variants=None, log_stream=None) -> dict:
    """Train + evaluate the requested variants; writes report JSON and table."""
    variants = list(variants or VARIANT_OVERRIDES)
    train_images, eval_images = ensure_datasets(spec)
    extractor = _make_extractor(spec, train_images)
    reports = {}
    report_path = Path(spec.out_dir) / "experiment_report.json"
    if report_path.exists():
        reports.update(json.loads(report_path.read_text()))
    for variant in variants:
        train_variant(spec, variant, train_images, log_stream=log_stream)
        reports[variant] = evaluate_variant(spec, variant, eval_images, extractor)
        write_report(report_path, reports)
    table = render_table({k: v for k, v in reports.items()})
    (Path(spec.out_dir) / "experiment_table.txt").write_text(table + "\n")
    if log_stream is not None:
        print(table, file=log_stream)
    return reports
