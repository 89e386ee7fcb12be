"""The agent's four learnable functions: state encoder, recurrent latent
transition (LSTM cell), reward head and value head, plus the soft-updated
target copy and checkpoint I/O.

The encoder is a 2-layer tanh MLP whose output becomes the hidden vector h;
the LSTM cell state c is zero-initialized at encode time. Heads are single
linear layers on h.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, add, matmul, mul, sigmoid, tanh, xavier_uniform

CHECKPOINT_MAGIC = "blindmaze.ckpt"
CHECKPOINT_VERSION = 1

GATES = ("i", "f", "g", "o")


@dataclass
class HiddenState:
    """Latent state carried through rollouts: hidden vector h and cell vector c."""

    h: Tensor
    c: Tensor


class ModelParams:
    """All parameters of one network copy, in a fixed iteration order."""

    def __init__(self, obs_dim, n_actions, hidden_dim, rng=None, trainable=True):
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.hidden_dim = hidden_dim
        if rng is None:
            rng = np.random.default_rng(0)

        def w(shape):
            return Tensor(xavier_uniform(shape, rng), requires_grad=trainable)

        def b(n):
            return Tensor(np.zeros((1, n)), requires_grad=trainable)

        self.tensors = {"enc_w1": w((obs_dim, hidden_dim)), "enc_b1": b(hidden_dim),
                        "enc_w2": w((hidden_dim, hidden_dim)), "enc_b2": b(hidden_dim)}
        for gate in GATES:
            self.tensors[f"lstm_w{gate}"] = w((n_actions, hidden_dim))
            self.tensors[f"lstm_u{gate}"] = w((hidden_dim, hidden_dim))
            self.tensors[f"lstm_b{gate}"] = b(hidden_dim)
        # Forget bias starts at 1 so fresh cells retain memory over long
        # action-only rollouts; all other biases start at zero.
        self.tensors["lstm_bf"].data[...] = 1.0
        self.tensors.update({"rew_w": w((hidden_dim, 1)), "rew_b": b(1),
                             "val_w": w((hidden_dim, 1)), "val_b": b(1)})

    def __getitem__(self, name):
        return self.tensors[name]

    def named(self):
        return self.tensors.items()

    def parameters(self):
        return list(self.tensors.values())

    def count(self):
        return sum(t.data.size for t in self.tensors.values())

    def copy(self, trainable=False):
        out = ModelParams(self.obs_dim, self.n_actions, self.hidden_dim, trainable=trainable)
        for name, t in out.named():
            t.data[...] = self.tensors[name].data
        return out

    def to_arrays(self):
        """Raw weight arrays keyed by name, for oracles and serialization."""
        return {name: t.data.copy() for name, t in self.named()}


def param_count(obs_dim, n_actions, hidden_dim):
    """Closed-form parameter count; must match ModelParams.count()."""
    enc = obs_dim * hidden_dim + hidden_dim + hidden_dim * hidden_dim + hidden_dim
    lstm = 4 * (n_actions * hidden_dim + hidden_dim * hidden_dim + hidden_dim)
    heads = 2 * (hidden_dim + 1)
    return enc + lstm + heads


def one_hot(indices, dim):
    indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))
    out = np.zeros((indices.shape[0], dim))
    out[np.arange(indices.shape[0]), indices] = 1.0
    return out


def encode(params, obs):
    """Observation batch (B, obs_dim) -> initial HiddenState; c starts at zero."""
    obs = obs if isinstance(obs, Tensor) else Tensor(obs)
    if obs.data.ndim != 2 or obs.data.shape[1] != params.obs_dim:
        raise ValueError(f"encode expects (batch, {params.obs_dim}) observations, got {obs.data.shape}")
    h1 = tanh(add(matmul(obs, params["enc_w1"]), params["enc_b1"]))
    h = tanh(add(matmul(h1, params["enc_w2"]), params["enc_b2"]))
    return HiddenState(h=h, c=Tensor(np.zeros(h.data.shape)))


def lstm_step(params, hs, action_onehot):
    """Standard LSTM cell update with the action one-hot as the input vector."""
    x = action_onehot if isinstance(action_onehot, Tensor) else Tensor(action_onehot)

    def gate(name, fn):
        pre = add(add(matmul(x, params[f"lstm_w{name}"]), matmul(hs.h, params[f"lstm_u{name}"])),
                  params[f"lstm_b{name}"])
        return fn(pre)

    i = gate("i", sigmoid)
    f = gate("f", sigmoid)
    g = gate("g", tanh)
    o = gate("o", sigmoid)
    c = add(mul(f, hs.c), mul(i, g))
    h = mul(o, tanh(c))
    return HiddenState(h=h, c=c)


def transition(params, hs, actions):
    """Advance the latent one step per batch row using integer action ids."""
    actions = np.atleast_1d(np.asarray(actions, dtype=np.int64))
    if actions.min() < 0 or actions.max() >= params.n_actions:
        raise ValueError(f"invalid action id in {actions.tolist()}; need [0, {params.n_actions})")
    return lstm_step(params, hs, one_hot(actions, params.n_actions))


def reward_head(params, hs):
    return add(matmul(hs.h, params["rew_w"]), params["rew_b"])


def value_head(params, hs):
    return add(matmul(hs.h, params["val_w"]), params["val_b"])


def soft_update(target, online, tau):
    """Exact interpolation: target <- (1 - tau) * target + tau * online."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    for name, t in target.named():
        o = online[name]
        if t.data.shape != o.data.shape:
            raise ValueError(f"soft_update shape mismatch on {name}: {t.data.shape} vs {o.data.shape}")
        t.data[...] = (1.0 - tau) * t.data + tau * o.data


def save_checkpoint(path, params, meta=None):
    """Write named parameter tensors with shapes as versioned JSON."""
    doc = {
        "magic": CHECKPOINT_MAGIC,
        "version": CHECKPOINT_VERSION,
        "obs_dim": params.obs_dim,
        "n_actions": params.n_actions,
        "hidden_dim": params.hidden_dim,
        "meta": meta or {},
        "params": {name: {"shape": list(t.data.shape), "data": t.data.reshape(-1).tolist()}
                   for name, t in params.named()},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path):
    """Read a checkpoint back into a non-trainable ModelParams; returns (params, meta)."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("magic") != CHECKPOINT_MAGIC:
        raise ValueError(f"not a parameter checkpoint: {path}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')} in {path}")
    params = ModelParams(doc["obs_dim"], doc["n_actions"], doc["hidden_dim"], trainable=False)
    for name, t in params.named():
        entry = doc["params"][name]
        params.tensors[name].data[...] = np.asarray(entry["data"]).reshape(entry["shape"])
    return params, doc.get("meta", {})
