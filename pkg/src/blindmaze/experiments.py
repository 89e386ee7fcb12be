"""Drivers for the three experimental settings (switching benchmark, maximum
blind length, per-mask difficulty) plus the unmasked control, writing
analysis-ready CSV tables.

Results layout per sweep:
    <out>/<N>_<p>_<seed>.csv          raw per-episode (or per-mask-size) rows
    <out>/checkpoints/<N>_<p>_<seed>.ckpt.json
    <out>/summary.csv                 one aggregated row per cell
    <out>/manifest.json               configs, config hashes, code version
"""

from __future__ import annotations

import csv
import json
import os
import subprocess
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__, nets
from .agent import run_episode, select_action, initial_controller_state
from .autodiff import no_grad
from .gridworld import (N_ACTIONS, Episode, benchmark_masks, bfs_optimal_length,
                        observe, prefix_mask, resolve_maze)
from .training import TrainConfig, config_hash, train

EXPERIMENTS = ("switching", "maxblind", "nomask", "permask")

_DEFAULTS = {
    "switching": dict(maze="benchmark", n_list=tuple(range(1, 13)), p_list=(0.5,),
                      seeds=(0, 1, 2), steps=60_000, eval_epsilon=0.05, episodes=20),
    "maxblind": dict(maze="zigzag", n_list=tuple(range(1, 26)), p_list=(0.0, 0.5),
                     seeds=(0, 1, 2), steps=45_000, eval_epsilon=0.0, episodes=1),
    "nomask": dict(maze="zigzag", n_list=tuple(range(1, 26)), p_list=(0.0, 0.5),
                   seeds=(0, 1, 2), steps=45_000, eval_epsilon=0.0, episodes=1),
    "permask": dict(maze="benchmark", n_list=tuple(range(1, 13)),
                    p_list=tuple(round(0.1 * i, 1) for i in range(10)),
                    seeds=(0,), steps=60_000, eval_epsilon=0.05, episodes=20),
}

SUMMARY_COLUMNS = {
    "switching": ("n_step", "blind_prob", "seed", "mean_length", "min_length",
                  "max_length", "solved", "episodes"),
    "maxblind": ("n_step", "blind_prob", "seed", "max_blind_solved"),
    "nomask": ("n_step", "blind_prob", "seed", "mean_length", "min_length",
               "max_length", "solved", "episodes"),
    "permask": ("mask", "n_step", "blind_prob", "seed", "lowest_length",
                "mean_length", "episodes"),
}


@dataclass
class SweepPlan:
    experiment: str
    maze: str
    n_list: tuple
    p_list: tuple
    seeds: tuple
    steps: int
    eval_epsilon: float
    episodes: int
    hidden_dim: int = 64

    def cells(self):
        return [(n, p, s) for n in self.n_list for p in self.p_list for s in self.seeds]

    def cell_config(self, n, p, seed):
        return TrainConfig(n_step=n, blind_prob=p, seed=seed, total_steps=self.steps,
                           maze=self.maze, eval_epsilon=self.eval_epsilon,
                           hidden_dim=self.hidden_dim).validate()


def make_plan(experiment, **overrides):
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}; have {', '.join(EXPERIMENTS)}")
    spec = dict(_DEFAULTS[experiment])
    spec.update({k: v for k, v in overrides.items() if v is not None})
    return SweepPlan(experiment=experiment, **spec)


def _cell_tag(n, p, seed):
    return f"{n}_{p}_{seed}"


def _eval_rng(cfg, salt):
    return np.random.default_rng(np.random.SeedSequence((cfg.seed, 7919, salt)))


def _write_rows(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _train_or_load(plan, cfg, maze, ckpt_path, reuse_from=None):
    """Train the cell, or load a previously trained checkpoint whose config
    hash and code version match (used by the unmasked control to reuse
    maxblind agents, and to resume interrupted sweeps)."""
    candidates = [ckpt_path]
    if reuse_from:
        candidates.append(os.path.join(reuse_from, "checkpoints",
                                       f"{_cell_tag(cfg.n_step, cfg.blind_prob, cfg.seed)}.ckpt.json"))
    for cand in candidates:
        if cand and os.path.exists(cand):
            params, meta = nets.load_checkpoint(cand)
            saved = meta.get("config", {})
            if (saved and meta.get("code_version") == __version__
                    and config_hash(TrainConfig(**saved)) == config_hash(cfg)):
                return params
    result = train(cfg, maze)
    os.makedirs(os.path.dirname(ckpt_path), exist_ok=True)
    nets.save_checkpoint(ckpt_path, result.params,
                         meta={"config": asdict(cfg), "maze": maze.name,
                               "code_version": __version__})
    return result.params


def run_cell(plan, n, p, seed, out_dir, reuse_from=None):
    """Train one (N, p, seed) cell and run its experiment's evaluation; writes
    the raw CSV and returns the summary row dict."""
    cfg = plan.cell_config(n, p, seed)
    maze = resolve_maze(plan.maze)
    os.makedirs(out_dir, exist_ok=True)
    tag = _cell_tag(n, p, seed)
    ckpt = os.path.join(out_dir, "checkpoints", f"{tag}.ckpt.json")
    params = _train_or_load(plan, cfg, maze, ckpt, reuse_from=reuse_from)
    raw_path = os.path.join(out_dir, f"{tag}.csv")

    if plan.experiment == "maxblind":
        optimal = bfs_optimal_length(maze)
        rows, solved = [], 0
        for k in range(1, optimal + 1):
            mask = prefix_mask(maze, k)
            length, _, reached, _ = run_episode(maze, [mask], params, cfg.gamma,
                                                plan.eval_epsilon, _eval_rng(cfg, k))
            rows.append((k, length, int(reached)))
            if not reached:
                break
            solved = k
        _write_rows(raw_path, ("k", "length", "reached"), rows)
        summary = {"n_step": n, "blind_prob": p, "seed": seed, "max_blind_solved": solved}
    elif plan.experiment in ("switching", "nomask"):
        masks = benchmark_masks(maze) if plan.experiment == "switching" else []
        rows = []
        for ep in range(plan.episodes):
            length, _, reached, blind = run_episode(maze, masks, params, cfg.gamma,
                                                    plan.eval_epsilon, _eval_rng(cfg, ep))
            rows.append((ep, length, int(reached), blind))
        _write_rows(raw_path, ("episode", "length", "reached", "blind_steps"), rows)
        lengths = [r[1] for r in rows]
        summary = {"n_step": n, "blind_prob": p, "seed": seed,
                   "mean_length": float(np.mean(lengths)),
                   "min_length": min(lengths), "max_length": max(lengths),
                   "solved": sum(r[2] for r in rows), "episodes": len(rows)}
    elif plan.experiment == "permask":
        rows = []
        per_mask = {}
        for mask_idx, mask in enumerate(benchmark_masks(maze)):
            lengths = []
            for ep in range(plan.episodes):
                length, _, reached, _ = run_episode(maze, [mask], params, cfg.gamma,
                                                    plan.eval_epsilon,
                                                    _eval_rng(cfg, 100_000 + 1_000 * mask_idx + ep))
                rows.append((mask.name, ep, length, int(reached)))
                lengths.append(length)
            per_mask[mask.name] = lengths
        _write_rows(raw_path, ("mask", "episode", "length", "reached"), rows)
        summary = [{"mask": name, "n_step": n, "blind_prob": p, "seed": seed,
                    "lowest_length": min(lengths), "mean_length": float(np.mean(lengths)),
                    "episodes": len(lengths)}
                   for name, lengths in per_mask.items()]
    else:
        raise ValueError(plan.experiment)
    with open(os.path.join(out_dir, f"{tag}.summary.json"), "w") as fh:
        json.dump(summary, fh)
    return summary


def merge_summary(plan, out_dir):
    """Collect per-cell summary fragments into summary.csv + manifest.json."""
    rows = []
    for n, p, seed in plan.cells():
        frag = os.path.join(out_dir, f"{_cell_tag(n, p, seed)}.summary.json")
        with open(frag) as fh:
            part = json.load(fh)
        rows.extend(part if isinstance(part, list) else [part])
    columns = SUMMARY_COLUMNS[plan.experiment]
    _write_rows(os.path.join(out_dir, "summary.csv"), columns,
                [tuple(row[c] for c in columns) for row in rows])
    manifest = {
        "experiment": plan.experiment,
        "maze": plan.maze,
        "eval_epsilon": plan.eval_epsilon,
        "episodes": plan.episodes,
        "code_version": __version__,
        "cells": [{"n_step": n, "blind_prob": p, "seed": s,
                   "config_hash": config_hash(plan.cell_config(n, p, s))}
                  for n, p, s in plan.cells()],
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return rows


def run_sweep(plan, out_dir, jobs=1, reuse_from=None):
    """Execute every cell (optionally as parallel subprocesses) and merge results."""
    os.makedirs(out_dir, exist_ok=True)
    cells = plan.cells()
    if jobs <= 1:
        for n, p, seed in cells:
            run_cell(plan, n, p, seed, out_dir, reuse_from=reuse_from)
    else:
        pending = list(cells)
        running = []
        env = dict(os.environ, OMP_NUM_THREADS="1", OPENBLAS_NUM_THREADS="1")
        while pending or running:
            while pending and len(running) < jobs:
                n, p, seed = pending.pop(0)
                cmd = [sys.executable, "-m", "blindmaze", "sweep",
                       "--experiment", plan.experiment, "--out", out_dir,
                       "--cell", f"{n},{p},{seed}",
                       "--maze", plan.maze, "--steps", str(plan.steps),
                       "--episodes", str(plan.episodes),
                       "--eval-epsilon", str(plan.eval_epsilon),
                       "--hidden-dim", str(plan.hidden_dim)]
                if reuse_from:
                    cmd += ["--reuse-from", reuse_from]
                running.append((subprocess.Popen(cmd, env=env), (n, p, seed)))
            proc, cell = running.pop(0)
            code = proc.wait()
            if code != 0:
                for other, _ in running:
                    other.terminate()
                raise RuntimeError(f"sweep cell {cell} failed with exit code {code}")
    return merge_summary(plan, out_dir)


def reward_prediction_mse(params, maze, gamma, epsilon, n_transitions, seed):
    """Mean squared one-step reward prediction error over a fresh rollout.

    Collects transitions by acting with the given policy (no blindness), then
    compares reward_head(f(g(s_t), a_t)) against the recorded reward.
    Returns (mse, within_002_fraction)."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 4242)))
    states, actions, rewards = [], [], []
    while len(states) < n_transitions:
        episode = Episode(maze)
        cs = initial_controller_state()
        while not episode.done and len(states) < n_transitions:
            cell = episode.cell
            obs = observe(maze, cell)
            action, cs = select_action(cs, obs, params, gamma, epsilon, rng)
            _, reward, _ = episode.step(action)
            states.append(maze.cell_index(cell))
            actions.append(action)
            rewards.append(reward)
    with no_grad():
        hs = nets.encode(params, nets.one_hot(states, maze.obs_dim))
        nxt = nets.lstm_step(params, hs, nets.one_hot(actions, N_ACTIONS))
        predicted = nets.reward_head(params, nxt).data.reshape(-1)
    err = predicted - np.asarray(rewards)
    return float(np.mean(err ** 2)), float(np.mean(np.abs(err) <= 0.02))
