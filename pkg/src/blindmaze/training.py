"""n-step latent rollout losses and the training loop: collect with
epsilon-greedy acting and blind-stretch injection, sample replay windows,
descend the combined value + reward loss, soft-update the target copy.

The value loss rolls the online latent n steps along recorded actions and
regresses each value prediction onto a bootstrapped one-step target computed
from the true state n steps later with the target parameters. The reward
loss pins each rolled-out reward prediction to the recorded reward.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import nets
from .agent import initial_controller_state, select_action
from .autodiff import AdamState, Tensor, add, mul, no_grad, square, tmean, zero_grads
from .gridworld import N_ACTIONS, Episode, observe
from .replay import ReplayBuffer, ReplayNotReady, Trajectory, maybe_start_blindness


class ConfigError(ValueError):
    """Invalid training configuration or config file."""


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; aborting with diagnostics."""


@dataclass
class TrainConfig:
    n_step: int = 1
    blind_prob: float = 0.0
    gamma: float = 0.99
    learning_rate: float = 1e-3
    tau: float = 0.005
    batch_size: int = 64
    buffer_capacity: int = 100_000
    total_steps: int = 60_000
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 0  # 0 means: first half of total_steps
    eval_epsilon: float = 0.0
    hidden_dim: int = 64
    seed: int = 0
    maze: str = "zigzag"
    max_episode_steps: int = 150
    warmup_steps: int = 1_000
    train_every: int = 1

    def validate(self):
        if self.n_step < 1:
            raise ConfigError(f"n_step must be >= 1, got {self.n_step}")
        if self.blind_prob < 0:
            raise ConfigError(f"blind_prob must be >= 0, got {self.blind_prob}")
        if self.blind_prob / self.n_step > 1:
            raise ConfigError(
                f"per-step blind trigger blind_prob/n_step = {self.blind_prob / self.n_step} exceeds 1")
        if not 0 < self.gamma <= 1:
            raise ConfigError(f"gamma must be in (0, 1], got {self.gamma}")
        if not 0 < self.tau <= 1:
            raise ConfigError(f"tau must be in (0, 1], got {self.tau}")
        if self.total_steps < 1 or self.batch_size < 1 or self.hidden_dim < 1:
            raise ConfigError("total_steps, batch_size and hidden_dim must be positive")
        return self

    def epsilon_at(self, step):
        decay = self.eps_decay_steps or max(1, self.total_steps // 2)
        if step >= decay:
            return self.eps_end
        return self.eps_start + (self.eps_end - self.eps_start) * (step / decay)


_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def parse_config_text(text, overrides=None):
    """Flat key = value config format; '#' starts a comment; unset keys default."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name: f.type for f in fields(TrainConfig)}
    cfg = TrainConfig()
    for key, val in values.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        current = getattr(cfg, key)
        try:
            if isinstance(current, bool):
                setattr(cfg, key, _BOOL[str(val).lower()])
            elif isinstance(current, int):
                setattr(cfg, key, int(val))
            elif isinstance(current, float):
                setattr(cfg, key, float(val))
            else:
                setattr(cfg, key, str(val))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"config key {key!r}: cannot parse {val!r}") from exc
    return cfg.validate()


def load_config(path, overrides=None):
    if path is None:
        return parse_config_text("", overrides)
    try:
        with open(path) as fh:
            return parse_config_text(fh.read(), overrides)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc


def config_hash(cfg):
    doc = json.dumps(asdict(cfg), sort_keys=True)
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


def compute_target(target_params, state_vec, gamma, terminal=False):
    """Bootstrapped target for one true state: max over actions of
    reward'(f'(g'(s), a)) + gamma * value'(f'(g'(s), a)); zero for terminal states."""
    if terminal:
        return 0.0
    with no_grad():
        hs = nets.encode(target_params, np.asarray(state_vec).reshape(1, -1))
        tiled = nets.HiddenState(h=Tensor(np.repeat(hs.h.data, N_ACTIONS, axis=0)),
                                 c=Tensor(np.repeat(hs.c.data, N_ACTIONS, axis=0)))
        nxt = nets.lstm_step(target_params, tiled, np.eye(N_ACTIONS))
        q = nets.reward_head(target_params, nxt).data + gamma * nets.value_head(target_params, nxt).data
    return float(q.max())


def _targets_for_indices(target_params, state_indices, gamma):
    """Targets for an int array of cell indices, deduplicated across the batch."""
    unique, inverse = np.unique(state_indices, return_inverse=True)
    with no_grad():
        obs = nets.one_hot(unique, target_params.obs_dim)
        hs = nets.encode(target_params, obs)
        u = unique.shape[0]
        tiled = nets.HiddenState(h=Tensor(np.tile(hs.h.data, (N_ACTIONS, 1))),
                                 c=Tensor(np.tile(hs.c.data, (N_ACTIONS, 1))))
        acts = np.repeat(np.eye(N_ACTIONS), u, axis=0)
        nxt = nets.lstm_step(target_params, tiled, acts)
        q = nets.reward_head(target_params, nxt).data + gamma * nets.value_head(target_params, nxt).data
        y_unique = q.reshape(N_ACTIONS, u).max(axis=0)
    return y_unique[inverse].reshape(state_indices.shape)


def rollout_latents(params, state_index, actions, obs_dim):
    """Online-latent rollout along recorded actions; returns hidden states h_1..h_L."""
    hs = nets.encode(params, nets.one_hot([state_index], obs_dim))
    out = []
    for action in actions:
        hs = nets.transition(params, hs, [action])
        out.append(hs)
    return out

def _window_targets(window, target_params, gamma, obs_dim):
    y = _targets_for_indices(target_params, np.asarray(window.states[1:]), gamma)
    if window.terminal:
        y[-1] = 0.0
    return y


def loss_value(window, params, target_params, gamma):
    """Per-window value loss: sum over n of (value(h_n) - target(s_{t+n}))^2."""
    obs_dim = params.obs_dim
    latents = rollout_latents(params, window.states[0], window.actions, obs_dim)
    y = _window_targets(window, target_params, gamma, obs_dim)
    total = None
    for n, hs in enumerate(latents):
        diff = add(nets.value_head(params, hs), Tensor([[-y[n]]]))
        term = square(diff)
        total = term if total is None else add(total, term)
    return total


def loss_reward(window, params):
    """Per-window reward loss: sum over n of (reward(h_n) - r_{t+n-1})^2."""
    latents = rollout_latents(params, window.states[0], window.actions, params.obs_dim)
    total = None
    for n, hs in enumerate(latents):
        diff = add(nets.reward_head(params, hs), Tensor([[-float(window.rewards[n])]]))
        term = square(diff)
        total = term if total is None else add(total, term)
    return total


def _collate(windows, n_step):
    batch = len(windows)
    states = np.zeros((batch, n_step + 1), dtype=np.int64)
    actions = np.zeros((batch, n_step), dtype=np.int64)
    rewards = np.zeros((batch, n_step))
    mask = np.zeros((batch, n_step))
    terminal_col = np.full(batch, -1)
    for i, w in enumerate(windows):
        length = len(w)
        states[i, : length + 1] = w.states
        states[i, length + 1 :] = w.states[length]
        actions[i, :length] = w.actions
        rewards[i, :length] = w.rewards
        mask[i, :length] = 1.0
        if w.terminal:
            terminal_col[i] = length - 1
    return states, actions, rewards, mask, terminal_col


def total_loss(windows, params, target_params, gamma):
    """Batched combined loss, averaged over windows. Returns (loss, value part,
    reward part) as graph tensors; masked terms cover window tails shorter
    than the horizon."""
    n_step = max(len(w) for w in windows)
    states, actions, rewards, mask, terminal_col = _collate(windows, n_step)
    y = _targets_for_indices(target_params, states[:, 1:], gamma)
    cols = np.arange(n_step)[None, :]
    y[terminal_col[:, None] == cols] = 0.0

    hs = nets.encode(params, nets.one_hot(states[:, 0], params.obs_dim))
    acc_v = acc_r = None
    full = mask.all()
    for n in range(n_step):
        hs = nets.lstm_step(params, hs, nets.one_hot(actions[:, n], N_ACTIONS))
        dv = add(nets.value_head(params, hs), Tensor(-y[:, n : n + 1]))
        dr = add(nets.reward_head(params, hs), Tensor(-rewards[:, n : n + 1]))
        sv, sr = square(dv), square(dr)
        if not full:
            m = Tensor(mask[:, n : n + 1])
            sv, sr = mul(sv, m), mul(sr, m)
        acc_v = sv if acc_v is None else add(acc_v, sv)
        acc_r = sr if acc_r is None else add(acc_r, sr)
    loss_v = tmean(acc_v)
    loss_r = tmean(acc_r)
    return add(loss_v, loss_r), loss_v, loss_r


def gradient_step(windows, params, target_params, adam, gamma, step=None):
    """One descent step on the batched loss; raises on non-finite loss."""
    loss, loss_v, loss_r = total_loss(windows, params, target_params, gamma)
    lv, lr_ = loss_v.item(), loss_r.item()
    if not np.isfinite(lv + lr_):
        raise TrainingDiverged(
            f"non-finite loss at step {step}: value={lv}, reward={lr_}")
    zero_grads(params.parameters())
    loss.backward()
    adam.step()
    zero_grads(params.parameters())
    return lv, lr_


METRICS_COLUMNS = ("global_step", "episode", "episode_length", "return",
                   "epsilon", "loss_value", "loss_reward")


@dataclass
class TrainResult:
    cfg: TrainConfig
    params: nets.ModelParams
    target_params: nets.ModelParams
    metrics: list
    buffer: ReplayBuffer


def train(cfg, maze):
    """Run the full loop on an unmasked maze; returns the trained parameters and
    one metrics row per finished episode. Fully deterministic given cfg.seed."""
    cfg.validate()
    streams = np.random.SeedSequence(cfg.seed).spawn(4)
    rng_init, rng_act, rng_blind, rng_sample = (np.random.default_rng(s) for s in streams)
    params = nets.ModelParams(maze.obs_dim, N_ACTIONS, cfg.hidden_dim, rng_init, trainable=True)
    target = params.copy(trainable=False)
    adam = AdamState(params.parameters(), lr=cfg.learning_rate)
    buffer = ReplayBuffer(capacity=cfg.buffer_capacity)
    metrics = []
    global_step = 0
    episode_idx = 0
    while global_step < cfg.total_steps:
        episode = Episode(maze, max_steps=cfg.max_episode_steps)
        cs = initial_controller_state()
        blind_left = 0
        state_ids = [maze.cell_index(episode.cell)]
        ep_actions, ep_rewards, ep_visible = [], [], []
        ep_return = 0.0
        ep_lv, ep_lr = [], []
        while not episode.done and global_step < cfg.total_steps:
            # Blind stretches only start once the agent has one latent to roll.
            if blind_left == 0 and ep_actions and maybe_start_blindness(cfg.blind_prob, cfg.n_step, rng_blind):
                blind_left = cfg.n_step
            blind = blind_left > 0
            if blind:
                blind_left -= 1
            obs = None if blind else observe(maze, episode.cell)
            action, cs = select_action(cs, obs, params, cfg.gamma,
                                       cfg.epsilon_at(global_step), rng_act)
            _, reward, _ = episode.step(action)
            ep_return += reward
            state_ids.append(maze.cell_index(episode.cell))
            ep_actions.append(action)
            ep_rewards.append(reward)
            ep_visible.append(not blind)
            global_step += 1
            if global_step > cfg.warmup_steps and global_step % cfg.train_every == 0:
                try:
                    windows = buffer.sample_windows(cfg.batch_size, cfg.n_step, rng_sample)
                except ReplayNotReady:
                    pass
                else:
                    lv, lr_ = gradient_step(windows, params, target, adam, cfg.gamma, step=global_step)
                    ep_lv.append(lv)
                    ep_lr.append(lr_)
                    nets.soft_update(target, params, cfg.tau)
        if not episode.done:
            break  # step budget exhausted mid-episode
        buffer.add_episode(Trajectory(
            states=np.asarray(state_ids, dtype=np.int64),
            actions=np.asarray(ep_actions, dtype=np.int64),
            rewards=np.asarray(ep_rewards),
            visible=np.asarray(ep_visible, dtype=bool),
            reached_goal=episode.reached_goal,
            episode_id=episode_idx,
            seed=cfg.seed,
        ))
        metrics.append({
            "global_step": global_step,
            "episode": episode_idx,
            "episode_length": episode.steps,
            "return": ep_return,
            "epsilon": cfg.epsilon_at(global_step),
            "loss_value": float(np.mean(ep_lv)) if ep_lv else None,
            "loss_reward": float(np.mean(ep_lr)) if ep_lr else None,
        })
        episode_idx += 1
    return TrainResult(cfg=cfg, params=params, target_params=target, metrics=metrics,
                       buffer=buffer)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def metrics_csv_bytes(metrics):
    """Render metrics rows as deterministic CSV bytes (repr for floats)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(METRICS_COLUMNS)
    for row in metrics:
        writer.writerow([_fmt(row[c]) for c in METRICS_COLUMNS])
    return out.getvalue().encode()


def train_to_dir(cfg, maze, out_dir):
    """Train and persist metrics.csv, checkpoint.json and manifest.json."""
    os.makedirs(out_dir, exist_ok=True)
    result = train(cfg, maze)
    with open(os.path.join(out_dir, "metrics.csv"), "wb") as fh:
        fh.write(metrics_csv_bytes(result.metrics))
    nets.save_checkpoint(os.path.join(out_dir, "checkpoint.json"), result.params,
                         meta={"config": asdict(cfg), "maze": maze.name})
    manifest = {"config": asdict(cfg), "config_hash": config_hash(cfg), "maze": maze.name,
                "episodes": len(result.metrics), "code_version": _code_version()}
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return result


def _code_version():
    from . import __version__

    return __version__
