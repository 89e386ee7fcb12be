"""Command-line entry point: train, eval, sweep, maze check, oracle.

Exit codes: 0 ok, 1 usage error, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, nets
from .agent import run_episode, write_records
from .experiments import EXPERIMENTS, make_plan, run_cell, run_sweep
from .gridworld import (MazeLoadError, bfs_optimal_length, greedy_policy_length,
                        resolve_mask, resolve_maze, value_iteration)
from .training import ConfigError, TrainingDiverged, load_config, train_to_dir

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser():
    parser = _Parser(prog="blindmaze", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train an agent and write checkpoint + metrics")
    p_train.add_argument("--config", help="flat key = value config file (all keys optional)")
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--n", type=int, help="n-step loss horizon override")
    p_train.add_argument("--p", type=float, help="blind-injection level override")
    p_train.add_argument("--out", default="run_out", help="output directory")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a maze")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--maze", required=True)
    p_eval.add_argument("--masks", nargs="*", default=[])
    p_eval.add_argument("--epsilon", type=float, default=0.0)
    p_eval.add_argument("--episodes", type=int, default=20)
    p_eval.add_argument("--gamma", type=float, default=0.99)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--record", action="store_true", help="write per-step recordings (JSON lines)")
    p_eval.add_argument("--record-out", default="eval_records.jsonl")

    p_sweep = sub.add_parser("sweep", help="run an experiment sweep")
    p_sweep.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--n-list", help="comma-separated N values (default: paper sweep)")
    p_sweep.add_argument("--p-list", help="comma-separated blind levels")
    p_sweep.add_argument("--seeds", help="comma-separated seeds")
    p_sweep.add_argument("--steps", type=int, help="training steps per cell")
    p_sweep.add_argument("--episodes", type=int, help="evaluation episodes per cell")
    p_sweep.add_argument("--eval-epsilon", type=float)
    p_sweep.add_argument("--hidden-dim", type=int)
    p_sweep.add_argument("--maze")
    p_sweep.add_argument("--reuse-from", help="sweep dir whose checkpoints may be reused")
    p_sweep.add_argument("--cell", help=argparse.SUPPRESS)  # internal: run one N,P,SEED cell

    p_maze = sub.add_parser("maze", help="maze file utilities")
    maze_sub = p_maze.add_subparsers(dest="maze_command", required=True)
    p_check = maze_sub.add_parser("check", help="validate a maze and print its optimal path length")
    p_check.add_argument("maze_file")

    p_oracle = sub.add_parser("oracle", help="tabular value iteration on a maze")
    p_oracle.add_argument("--maze", required=True)
    p_oracle.add_argument("--gamma", type=float, default=0.99)
    return parser


def _cmd_train(args):
    overrides = {"seed": args.seed, "n_step": args.n, "blind_prob": args.p}
    cfg = load_config(args.config, overrides={k: v for k, v in overrides.items() if v is not None})
    maze = resolve_maze(cfg.maze)
    result = train_to_dir(cfg, maze, args.out)
    solved = sum(1 for row in result.metrics if row["episode_length"] < cfg.max_episode_steps)
    print(f"trained {cfg.total_steps} steps on {maze.name}: "
          f"{len(result.metrics)} episodes, {solved} reached the goal")
    print(f"outputs in {args.out}: metrics.csv, checkpoint.json, manifest.json")
    return EXIT_OK


def _cmd_eval(args):
    params, meta = nets.load_checkpoint(args.checkpoint)
    maze = resolve_maze(args.maze)
    if params.obs_dim != maze.obs_dim:
        raise ConfigError(f"checkpoint expects {params.obs_dim}-dim observations, "
                          f"maze {maze.name} has {maze.obs_dim}")
    masks = [resolve_mask(m, maze) for m in args.masks]
    rng = np.random.default_rng(args.seed)
    lengths, reached_count, records = [], 0, []
    for _ in range(args.episodes):
        record = [] if args.record else None
        length, _, reached, _ = run_episode(maze, masks, params, args.gamma,
                                            args.epsilon, rng, record=record)
        lengths.append(length)
        reached_count += int(reached)
        if args.record:
            records.append(record)
    print(f"episodes: {args.episodes}  reached goal: {reached_count}")
    print(f"episode length mean/min/max: {float(np.mean(lengths))}/{min(lengths)}/{max(lengths)}")
    if args.record:
        write_records(args.record_out, records)
        print(f"recordings written to {args.record_out}")
    return EXIT_OK


def _parse_list(text, cast):
    return tuple(cast(part) for part in text.split(",") if part != "")


def _cmd_sweep(args):
    plan = make_plan(
        args.experiment,
        maze=args.maze,
        n_list=_parse_list(args.n_list, int) if args.n_list else None,
        p_list=_parse_list(args.p_list, float) if args.p_list else None,
        seeds=_parse_list(args.seeds, int) if args.seeds else None,
        steps=args.steps,
        episodes=args.episodes,
        eval_epsilon=args.eval_epsilon,
        hidden_dim=args.hidden_dim,
    )
    reuse = args.reuse_from
    if reuse is None and plan.experiment == "nomask":
        sibling = os.path.join(os.path.dirname(os.path.abspath(args.out)), "maxblind")
        reuse = sibling if os.path.isdir(sibling) else None
    if args.cell:
        n, p, seed = args.cell.split(",")
        run_cell(plan, int(n), float(p), int(seed), args.out, reuse_from=reuse)
        return EXIT_OK
    rows = run_sweep(plan, args.out, jobs=args.jobs, reuse_from=reuse)
    print(f"{plan.experiment} sweep finished: {len(plan.cells())} cells, "
          f"{len(rows)} summary rows -> {os.path.join(args.out, 'summary.csv')}")
    return EXIT_OK


def _cmd_maze_check(args):
    maze = resolve_maze(args.maze_file)
    print(f"maze {maze.name}: {maze.height}x{maze.width}, "
          f"{len(maze.walls)} walls, start {maze.start}, goal {maze.goal}")
    print(f"optimal path: {bfs_optimal_length(maze)}")
    return EXIT_OK


def _cmd_oracle(args):
    maze = resolve_maze(args.maze)
    values = value_iteration(maze, gamma=args.gamma)
    length = greedy_policy_length(maze, values, gamma=args.gamma)
    print(f"optimal episode length: {length}")
    print(f"start value: {values[maze.start]!r}")
    print(json.dumps({f"{r},{c}": values[(r, c)] for (r, c) in sorted(values)}, indent=2))
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "maze":
            return _cmd_maze_check(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        raise AssertionError(args.command)
    except (ConfigError, MazeLoadError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingDiverged, RuntimeError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
