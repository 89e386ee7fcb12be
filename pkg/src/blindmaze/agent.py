"""Closed-loop and open-loop control over one shared network.

With a visible observation the latent is re-encoded from scratch (closed
loop); while blind the latent is advanced by the learned transition alone
(open loop). Action selection is a one-step lookahead in latent space:
argmax over a of reward(f(latent, a)) + gamma * value(f(latent, a)).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from . import nets
from .autodiff import Tensor, no_grad
from .gridworld import N_ACTIONS, Episode, observe


class Mode(enum.Enum):
    CLOSED = "closed"
    OPEN = "open"


@dataclass
class ControllerState:
    """mode says how the last action was chosen; latent is the already-advanced
    hidden state, used only if the next observation turns out blind."""

    mode: Mode
    latent: nets.HiddenState | None
    steps_blind: int = 0


def initial_controller_state():
    return ControllerState(mode=Mode.CLOSED, latent=None, steps_blind=0)


def q_rollout(params, obs_vec, actions, gamma):
    """Multi-step latent Q: sum_k gamma^k * reward(h_{k+1}) + gamma^n * value(h_n)."""
    if len(actions) == 0:
        raise ValueError("q_rollout needs at least one action")
    with no_grad():
        hs = nets.encode(params, np.asarray(obs_vec).reshape(1, -1))
        total = 0.0
        for k, action in enumerate(actions):
            hs = nets.transition(params, hs, [action])
            total += gamma ** k * nets.reward_head(params, hs).item()
        total += gamma ** len(actions) * nets.value_head(params, hs).item()
    return total


def one_step_lookahead(params, hs, gamma):
    """Q values of every action from a single-row latent, plus the advanced latents."""
    with no_grad():
        tiled = nets.HiddenState(
            h=Tensor(np.repeat(hs.h.data, N_ACTIONS, axis=0)),
            c=Tensor(np.repeat(hs.c.data, N_ACTIONS, axis=0)),
        )
        advanced = nets.lstm_step(params, tiled, np.eye(N_ACTIONS))
        q = nets.reward_head(params, advanced).data + gamma * nets.value_head(params, advanced).data
    return q.reshape(-1), advanced


def select_action(cs, obs, params, gamma, epsilon, rng):
    """Pick an action from the current observation (or the carried latent when
    blind) and return it with the updated controller state."""
    if obs is not None:
        with no_grad():
            latent = nets.encode(params, obs.reshape(1, -1))
        mode, steps_blind = Mode.CLOSED, 0
    else:
        if cs.latent is None:
            raise RuntimeError("blind observation before any visible one; no latent to roll out")
        latent = cs.latent
        mode, steps_blind = Mode.OPEN, cs.steps_blind + 1
    q, advanced = one_step_lookahead(params, latent, gamma)
    action = int(np.argmax(q))
    if epsilon > 0 and rng.random() < epsilon:
        action = int(rng.integers(N_ACTIONS))
    new_latent = nets.HiddenState(
        h=Tensor(advanced.h.data[action : action + 1]),
        c=Tensor(advanced.c.data[action : action + 1]),
    )
    return action, ControllerState(mode=mode, latent=new_latent, steps_blind=steps_blind)


def run_episode(maze, masks, params, gamma, epsilon, rng, max_steps=None, record=None):
    """Run one evaluation episode; returns (length, return, reached_goal, blind_steps).

    When `record` is a list, one JSON-ready dict per step is appended:
    (t, cell, blind flag, action, reward).
    """
    for mask in masks:
        if maze.start in mask.cells:
            raise ValueError(f"mask {mask.name} covers the start cell; the agent must begin sighted")
    episode = Episode(maze, max_steps=max_steps)
    cs = initial_controller_state()
    total_reward = 0.0
    blind_steps = 0
    while not episode.done:
        cell = episode.cell
        obs = observe(maze, cell, masks)
        if obs is None:
            blind_steps += 1
        action, cs = select_action(cs, obs, params, gamma, epsilon, rng)
        _, reward, _ = episode.step(action)
        total_reward += reward
        if record is not None:
            record.append({"t": episode.steps - 1, "cell": list(cell),
                           "blind": obs is None, "action": action, "reward": reward})
    return episode.steps, total_reward, episode.reached_goal, blind_steps


def write_records(path, episodes_records):
    """Write per-episode step recordings as JSON lines."""
    with open(path, "w") as fh:
        for ep_idx, steps in enumerate(episodes_records):
            for row in steps:
                fh.write(json.dumps({"episode": ep_idx, **row}) + "\n")
