"""Shared heavy-run harness for the acceptance suite.

Trained cells are cached under tests/.acceptance_cache keyed by the sweep
layout; rerunning the suite reuses finished checkpoints (training is
deterministic per config, so a cache hit is equivalent to a fresh run).
"""

from __future__ import annotations

import csv
from pathlib import Path

from blindmaze import nets
from blindmaze.experiments import make_plan, run_sweep
from blindmaze.gridworld import builtin_maze
from blindmaze.training import TrainConfig, train_to_dir

CACHE = Path(__file__).resolve().parent / ".acceptance_cache"


def maxblind_plan():
    # Scaled reproduction: N in {5, 8}, p in {0, 0.5}, 3 seeds, 45k steps.
    return make_plan("maxblind", n_list=(5, 8), p_list=(0.0, 0.5), seeds=(0, 1, 2))


def switching_plan(n_list, seeds):
    return make_plan("switching", n_list=n_list, seeds=seeds)


def ensure_sweep(plan, dirname):
    out = CACHE / dirname
    summary = out / "summary.csv"
    if not summary.exists():
        run_sweep(plan, str(out), jobs=1)
    with open(summary) as fh:
        return list(csv.DictReader(fh)), out


def ensure_open5_run(seed):
    out = CACHE / "open5" / f"seed{seed}"
    ckpt = out / "checkpoint.json"
    if not ckpt.exists():
        cfg = TrainConfig(n_step=1, blind_prob=0.0, total_steps=10_000,
                          maze="open5", seed=seed)
        train_to_dir(cfg, builtin_maze("open5"), str(out))
    params, _ = nets.load_checkpoint(str(ckpt))
    return params


def load_cell_checkpoint(sweep_dir, n, p, seed):
    path = Path(sweep_dir) / "checkpoints" / f"{n}_{p}_{seed}.ckpt.json"
    params, meta = nets.load_checkpoint(str(path))
    return params, meta
