#!/usr/bin/env python3
"""Train one zigzag cell and report how long a prefix blindness mask the
greedy policy survives. Diagnostic harness for init/schedule experiments."""

import argparse
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

import numpy as np

from blindmaze.agent import run_episode
from blindmaze.gridworld import bfs_optimal_length, builtin_maze, prefix_mask
from blindmaze.training import TrainConfig, train


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, default=5)
    parser.add_argument("--p", type=float, default=0.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--steps", type=int, default=45_000)
    parser.add_argument("--hidden", type=int, default=64)
    parser.add_argument("--eps-decay", type=int, default=0)
    args = parser.parse_args()

    maze = builtin_maze("zigzag")
    cfg = TrainConfig(n_step=args.n, blind_prob=args.p, seed=args.seed,
                      total_steps=args.steps, maze="zigzag", hidden_dim=args.hidden,
                      eps_decay_steps=args.eps_decay)
    t0 = time.time()
    result = train(cfg, maze)
    solved = 0
    for k in range(1, bfs_optimal_length(maze) + 1):
        _, _, reached, _ = run_episode(maze, [prefix_mask(maze, k)], result.params,
                                       cfg.gamma, 0.0, np.random.default_rng(k))
        if not reached:
            break
        solved = k
    print(f"n={args.n} p={args.p} seed={args.seed} hidden={args.hidden} "
          f"eps_decay={args.eps_decay}: max blind solved {solved} "
          f"({time.time() - t0:.0f}s)")


if __name__ == "__main__":
    main()
