#!/usr/bin/env python3
"""Render a qualitative panel for a checkpoint: for each held-out image,
columns are [original | warped input | sketch | predicted mask | coarse |
refined | blended result | |result-original| heat].

    python scripts/render_samples.py --checkpoint runs/full/ckpt_latest.zip \
        --data runs/toy/data/heldout --out panel.png --count 6
"""

import argparse

import numpy as np

from sketchmend.config import RunConfig, apply_overrides
from sketchmend.engine import load_model, run_pipeline
from sketchmend.evaluation import build_eval_pairs
from sketchmend.experiment import TOY_OVERRIDES
from sketchmend.imaging import save_image
from sketchmend.toydata import load_dataset


def to_rgb(arr):
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    return np.clip(arr, 0.0, 1.0)


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=6)
    p.add_argument("--seed", type=int, default=99)
    p.add_argument("--clean-input", action="store_true", help="feed the unwarped image instead")
    args = p.parse_args()

    handle = load_model(args.checkpoint)
    cfg = apply_overrides(RunConfig(), TOY_OVERRIDES + [f"net.resolution={handle.config.resolution}"])
    images = load_dataset(args.data)[: args.count]
    pairs = build_eval_pairs(images, seed=args.seed, cfg=cfg)

    rows = []
    for pair in pairs:
        inp = pair.x if args.clean_input else pair.x_warped
        out = run_pipeline(handle, inp, pair.sketch)
        err = np.abs(out.result - pair.x).mean(axis=2)
        cells = [pair.x, inp, pair.sketch, out.mask, out.y0, out.y1, out.result, err / max(err.max(), 1e-6)]
        rows.append(np.concatenate([to_rgb(c) for c in cells], axis=1))
    panel = np.concatenate(rows, axis=0)
    save_image(panel, args.out)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
