#!/usr/bin/env python3
"""Diagnostics for a toy checkpoint: eval metrics, mask behavior, and the
generator-vs-copy comparison at damaged pixels (the quantity that decides
whether opening the mask pays off during training).

    python scripts/probe_checkpoint.py --out .cache/pilot --variant full
"""

import argparse
import json
from pathlib import Path

import numpy as np
import torch

from sketchmend.engine import load_model
from sketchmend.evaluation import build_eval_pairs, empty_sketch_report, evaluate_pairs
from sketchmend.experiment import ExperimentSpec, toy_config
from sketchmend.toydata import load_dataset


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", required=True, help="experiment directory")
    p.add_argument("--variant", default="full")
    p.add_argument("--count", type=int, default=30)
    p.add_argument("--empty-sketch", action="store_true")
    args = p.parse_args()

    spec = ExperimentSpec(out_dir=args.out)
    cfg = toy_config(spec, args.variant)
    handle = load_model(Path(args.out) / "runs" / args.variant / "ckpt_latest.zip")
    eval_imgs = load_dataset(Path(args.out) / "data" / "heldout")[: args.count]
    pairs = build_eval_pairs(eval_imgs, seed=spec.seed + 99, cfg=cfg)

    rep = evaluate_pairs(handle, pairs)
    print(f"step {handle.step}: " + json.dumps({k: round(v, 4) for k, v in rep.items()}))
    if args.empty_sketch:
        print("empty sketch:", json.dumps(empty_sketch_report(handle, eval_imgs)))

    model = handle.model
    if model.mask_estimator is None:
        return 0
    y1errs, fxerrs, wins, m_dmg, m_quiet = [], [], [], [], []
    for pair in pairs:
        x_t = torch.as_tensor(pair.x_warped).permute(2, 0, 1)[None]
        c_t = torch.as_tensor(pair.sketch)[None, None]
        r_t = torch.as_tensor(pair.region_mask)[None, None]
        with torch.no_grad():
            m, _ = model.mask_estimator(x_t, c_t)
            v = model.style_vector(r_t * x_t, r_t)
            _, y1 = model.generator((1 - r_t) * x_t, r_t, c_t, model.style_feature(v))
        y1n = y1[0].permute(1, 2, 0).numpy()
        damage = np.abs(pair.x_warped - pair.x).max(axis=2) > 0.05
        if damage.sum() < 10:
            continue
        y1errs.append(np.abs(y1n - pair.x).mean(axis=2)[damage].mean())
        fxerrs.append(np.abs(pair.x_warped - pair.x).mean(axis=2)[damage].mean())
        wins.append(y1errs[-1] < fxerrs[-1])
        mask = m[0, 0].numpy()
        m_dmg.append(mask[damage].mean())
        m_quiet.append(mask[~damage].mean())
    print(
        f"damaged px: y1 {np.mean(y1errs):.4f} vs copy {np.mean(fxerrs):.4f} "
        f"(y1 wins {np.mean(wins) * 100:.0f}%); mask on damage {np.mean(m_dmg):.3f}, off {np.mean(m_quiet):.3f}"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
