"""Operator entry points.

Subcommands: prepare-data, make-toy-data, train, eval, edit, serve.
Exit codes: 0 ok, 2 config error, 3 data error, 4 runtime error.
Logs go to stderr; artifacts are written atomically under --out.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, apply_overrides, dump_config, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


class DataError(RuntimeError):
    """Missing or unreadable input data."""


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = list(getattr(args, "set", None) or [])
    if getattr(args, "steps", None) is not None:
        overrides.append(f"train.steps={args.steps}")
    if getattr(args, "seed", None) is not None:
        overrides.append(f"train.seed={args.seed}")
    return apply_overrides(cfg, overrides)


def _load_images(data_dir) -> np.ndarray:
    from .toydata import load_dataset

    try:
        return load_dataset(data_dir)
    except (FileNotFoundError, ValueError) as e:
        raise DataError(str(e)) from e


def _write_json_atomic(path: Path, doc) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, indent=1, sort_keys=True))
    tmp.replace(path)


# -- subcommands --------------------------------------------------------------


def _save_image_atomic(img, path: Path) -> None:
    from .imaging import save_image

    tmp = path.with_name(path.name + ".tmp")
    save_image(img, tmp)
    tmp.replace(path)


def cmd_prepare_data(args) -> int:
    from .sketchgen import PairConfig, make_training_pair

    cfg = _load_run_config(args)
    images = _load_images(args.input_dir) if args.count else None
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    pair_cfg = PairConfig(warp=cfg.warp, edge=cfg.edge, min_sketch_px=cfg.train.min_sketch_px)
    samples = []
    for i in range(args.count):
        x = images[int(rng.integers(0, len(images)))]
        pair = make_training_pair(x, rng, pair_cfg)
        stem = f"sample_{i:05d}"
        _save_image_atomic(x, out / f"{stem}_original.png")
        _save_image_atomic(pair.x_warped, out / f"{stem}_warped.png")
        _save_image_atomic(np.repeat(pair.sketch[:, :, None], 3, axis=2), out / f"{stem}_sketch.png")
        entry = {
            "stem": stem,
            "region": list(pair.region.bbox),
            "sketch_px": int(pair.sketch.sum()),
        }
        _write_json_atomic(out / f"{stem}.json", entry)
        samples.append(entry)
    _write_json_atomic(out / "manifest.json", {"seed": args.seed, "count": args.count, "samples": samples})
    print(f"wrote {args.count} samples to {out}", file=sys.stderr)
    return EXIT_OK


def cmd_make_toy_data(args) -> int:
    from .toydata import write_dataset

    manifest = write_dataset(args.output_dir, count=args.count, seed=args.seed, size=args.size)
    print(f"wrote {manifest['count']} toy images to {args.output_dir}", file=sys.stderr)
    return EXIT_OK


def cmd_train(args) -> int:
    from .training import run_training

    cfg = _load_run_config(args)
    images = _load_images(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config_used.cfg").write_text(dump_config(cfg))
    run_training(cfg, images, out, resume=args.resume, log_stream=sys.stderr)
    print(f"training finished at step {cfg.train.steps}; artifacts in {out}", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    from .engine import load_model
    from .evaluation import build_eval_pairs, empty_sketch_report, evaluate_pairs, render_table, write_report
    from .features import StubFeatureExtractor, TinyConvFeatureExtractor

    cfg = _load_run_config(args)
    images = _load_images(args.data)
    if args.features == "stub" or args.features is None:
        extractor = StubFeatureExtractor()
    else:
        extractor = TinyConvFeatureExtractor.load(args.features)
    pairs = build_eval_pairs(images, seed=args.seed or 0, cfg=cfg)
    reports = {}
    for spec in args.checkpoint:
        name, _, path = spec.rpartition("=")
        name = name or "model"
        handle = load_model(path)
        rep = evaluate_pairs(handle, pairs, extractor=extractor)
        rep["empty_sketch"] = empty_sketch_report(handle, images)
        reports[name] = rep
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(out / "eval_report.json", reports)
    table = render_table(reports)
    (out / "eval_table.txt").write_text(table + "\n")
    print(table)
    return EXIT_OK


def cmd_edit(args) -> int:
    from .engine import edit, load_model
    from .imaging import StrokeSet, load_image, save_image, to_uint8
    from PIL import Image as PILImage

    handle = load_model(args.checkpoint)
    try:
        image = load_image(args.image)
    except (FileNotFoundError, ValueError) as e:
        raise DataError(f"cannot read image: {e}") from e
    strokes = sketch = None
    if args.strokes:
        try:
            strokes = StrokeSet.from_json(Path(args.strokes).read_text())
        except (FileNotFoundError, ValueError) as e:
            raise DataError(f"cannot read strokes: {e}") from e
    elif args.sketch:
        from .imaging import load_image as _load

        sketch = (np.asarray(_load(args.sketch)).mean(axis=2) > 0.5).astype(np.float32)
    else:
        strokes = StrokeSet()
    result = edit(handle, image, strokes=strokes, sketch=sketch, return_mask=args.mask_out is not None)
    out = Path(args.out)
    tmp = out.with_name(out.name + ".tmp")
    save_image(result.result, tmp)
    tmp.replace(out)
    if args.mask_out:
        PILImage.fromarray(to_uint8(result.mask), "L").save(args.mask_out)
    print(f"edited image written to {out} ({result.timing_ms:.1f} ms)", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve

    serve(args.checkpoint, host=args.host, port=args.port, max_image_side=args.max_image_side)
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sketchmend", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def add_config_opts(sp, steps=False):
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="config override (repeatable)")
        if steps:
            sp.add_argument("--steps", type=int, help="override train.steps")
            sp.add_argument("--seed", type=int, help="override train.seed")

    sp = sub.add_parser("prepare-data", help="write synthetic warped training/eval samples")
    sp.add_argument("--input-dir", required=True)
    sp.add_argument("--output-dir", required=True)
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    add_config_opts(sp)
    sp.set_defaults(fn=cmd_prepare_data)

    sp = sub.add_parser("make-toy-data", help="generate the colored-polygon toy dataset")
    sp.add_argument("--output-dir", required=True)
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--size", type=int, default=64)
    sp.set_defaults(fn=cmd_make_toy_data)

    sp = sub.add_parser("train", help="run self-supervised training")
    sp.add_argument("--data", required=True, help="directory of training PNGs")
    sp.add_argument("--out", required=True)
    sp.add_argument("--resume", help="checkpoint to continue from")
    add_config_opts(sp, steps=True)
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("eval", help="evaluate checkpoints on held-out images")
    sp.add_argument("--checkpoint", action="append", required=True, metavar="[NAME=]PATH")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--features", help="'stub' (default) or a TinyConvFeatureExtractor .npz")
    add_config_opts(sp)
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("edit", help="edit one image offline")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--image", required=True)
    sp.add_argument("--strokes", help="StrokeSet JSON file")
    sp.add_argument("--sketch", help="binary sketch PNG")
    sp.add_argument("--out", required=True)
    sp.add_argument("--mask-out")
    sp.set_defaults(fn=cmd_edit)

    sp = sub.add_parser("serve", help="run the HTTP inference service")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8008)
    sp.add_argument("--max-image-side", type=int, default=2048)
    sp.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
