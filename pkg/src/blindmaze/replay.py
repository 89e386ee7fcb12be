"""Episode-structured replay buffer with n-step window sampling and the
blind-stretch injection rule used while collecting.

Stored states are always the environment's ground-truth cells; the per-step
visible flag records what the agent actually saw.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np


class ReplayNotReady(RuntimeError):
    """Sampling was requested before any episode is stored; retry later."""


def maybe_start_blindness(p, n_step, rng):
    """Decide whether a blind stretch of n_step steps starts now (probability p / n_step).

    Callers invoke this only when not already inside an injected stretch.
    """
    if p < 0:
        raise ValueError(f"blind probability must be nonnegative, got {p}")
    trigger = p / n_step
    if trigger > 1.0:
        raise ValueError(f"per-step blind trigger p/N = {trigger} exceeds 1")
    return bool(p > 0 and rng.random() < trigger)


@dataclass
class Trajectory:
    """One finished episode. states has length len(actions) + 1: the ground-truth
    cell index before each step plus the final cell after the last step."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    visible: np.ndarray
    reached_goal: bool
    episode_id: int = 0
    seed: int | None = None

    def __post_init__(self):
        if len(self.states) != len(self.actions) + 1:
            raise ValueError("trajectory needs one more state than actions")

    def __len__(self):
        return len(self.actions)


@dataclass
class Window:
    """Contiguous slice of one episode: L transitions plus the L+1 boundary states.
    terminal is True when the final state is the goal (bootstrap target is zero there)."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    terminal: bool

    def __len__(self):
        return len(self.actions)


@dataclass
class ReplayBuffer:
    """Ring of whole episodes holding at most `capacity` steps; evicts oldest-first."""

    capacity: int = 100_000
    episodes: deque = field(default_factory=deque)
    total_steps: int = 0

    def add_episode(self, traj):
        if len(traj) == 0:
            return
        self.episodes.append(traj)
        self.total_steps += len(traj)
        while self.total_steps > self.capacity and len(self.episodes) > 1:
            dropped = self.episodes.popleft()
            self.total_steps -= len(dropped)

    def sample_windows(self, batch, n_step, rng):
        """Sample `batch` windows of up to n_step transitions, start index uniform
        over all stored steps; windows never cross an episode boundary."""
        if self.total_steps == 0:
            raise ReplayNotReady("replay buffer holds no finished episodes yet")
        lengths = np.array([len(ep) for ep in self.episodes])
        offsets = np.cumsum(lengths)
        flat = rng.integers(0, self.total_steps, size=batch)
        ep_idx = np.searchsorted(offsets, flat, side="right")
        episodes = list(self.episodes)
        windows = []
        for idx, ep_i in zip(flat, ep_idx):
            tau = int(idx - (offsets[ep_i - 1] if ep_i else 0))
            ep = episodes[ep_i]
            length = min(n_step, len(ep) - tau)
            terminal = ep.reached_goal and tau + length == len(ep)
            windows.append(Window(
                states=ep.states[tau : tau + length + 1],
                actions=ep.actions[tau : tau + length],
                rewards=ep.rewards[tau : tau + length],
                terminal=terminal,
            ))
        return windows

    def dump_jsonl(self, path):
        """Write stored episodes as JSON lines for offline analysis."""
        with open(path, "w") as fh:
            for ep in self.episodes:
                fh.write(json.dumps({
                    "episode_id": ep.episode_id,
                    "seed": ep.seed,
                    "states": ep.states.tolist(),
                    "actions": ep.actions.tolist(),
                    "rewards": ep.rewards.tolist(),
                    "visible": ep.visible.tolist(),
                    "reached_goal": ep.reached_goal,
                }) + "\n")


def expected_blind_fraction(p, n_step):
    """Closed-form long-run fraction of blind steps under the injection rule.

    Renewal argument: a cycle is a geometric run of sighted steps (success
    probability q = p/N, the triggering step being the first blind one)
    followed by the remaining N-1 blind steps, so
    E[cycle] = (1-q)/q + N and the blind fraction is Nq / (1 - q + Nq).
    """
    if p == 0:
        return 0.0
    q = p / n_step
    return n_step * q / (1.0 - q + n_step * q)
