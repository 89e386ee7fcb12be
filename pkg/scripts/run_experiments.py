#!/usr/bin/env python3
"""Run the experiment sweeps end to end.

Paper scale reproduces the published setup (hours of CPU):
    python scripts/run_experiments.py --scale paper --out results --jobs 4

Desk scale is a minutes-long shakeout of the same pipeline:
    python scripts/run_experiments.py --scale desk --out results_desk
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from blindmaze.experiments import EXPERIMENTS, make_plan, run_sweep

DESK_OVERRIDES = dict(n_list=(1, 2, 5), p_list=(0.0, 0.5), seeds=(0,),
                      steps=3_000, episodes=5)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scale", choices=("paper", "desk"), default="desk")
    parser.add_argument("--out", default="results")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--experiments", nargs="*", default=list(EXPERIMENTS),
                        choices=EXPERIMENTS)
    args = parser.parse_args()

    for experiment in args.experiments:
        overrides = {} if args.scale == "paper" else dict(DESK_OVERRIDES)
        plan = make_plan(experiment, **overrides)
        out = os.path.join(args.out, experiment)
        reuse = None
        if experiment == "nomask":
            sibling = os.path.join(args.out, "maxblind")
            reuse = sibling if os.path.isdir(sibling) else None
        print(f"== {experiment}: {len(plan.cells())} cells x {plan.steps} steps -> {out}")
        rows = run_sweep(plan, out, jobs=args.jobs, reuse_from=reuse)
        print(f"   wrote {len(rows)} summary rows")


if __name__ == "__main__":
    main()
