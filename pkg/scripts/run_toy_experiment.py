#!/usr/bin/env python3
"""Train and evaluate all toy-experiment variants.

Example:
    python scripts/run_toy_experiment.py --out runs/toy --steps 3000
"""

import argparse
import sys

from sketchmend.experiment import VARIANT_OVERRIDES, ExperimentSpec, run_experiment


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=3000, help="steps for full / no_bmr runs")
    p.add_argument("--ablation-steps", type=int, default=1000)
    p.add_argument("--train-count", type=int, default=2000)
    p.add_argument("--eval-count", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--extractor", choices=("tiny", "stub"), default="tiny")
    p.add_argument("--variants", nargs="*", choices=list(VARIANT_OVERRIDES), default=None)
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    args = p.parse_args()
    spec = ExperimentSpec(
        out_dir=args.out,
        steps_main=args.steps,
        steps_ablation=args.ablation_steps,
        train_count=args.train_count,
        eval_count=args.eval_count,
        seed=args.seed,
        extractor=args.extractor,
        extra_overrides=tuple(args.set),
    )
    run_experiment(spec, variants=args.variants, log_stream=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
