"""Dense-tensor reverse-mode autodiff: the minimal op set needed by the agent nets.

Tensors hold float64 numpy arrays. Ops record graph edges only when an input
requires gradients (and grad mode is on), so the same forward code serves both
the differentiated training path and cheap no-grad evaluation.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np


class ShapeMismatchError(ValueError):
    """Raised when operand shapes do not conform for an op."""


_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (evaluation / target nets)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_grad_owned")

    def __init__(self, data, requires_grad=False):
        if type(data) is not np.ndarray or data.dtype != np.float64:
            data = np.asarray(data, dtype=np.float64)
        self.data = data
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self._grad_owned = False

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g, own=False):
        # Copy-on-write: the first contribution may be kept by reference (it is
        # never mutated by its producer once backward reaches this node).
        if self.grad is None:
            self.grad = g
            self._grad_owned = own
        elif self._grad_owned:
            self.grad += g
        else:
            self.grad = self.grad + g
            self._grad_owned = True

    def backward(self):
        """Backpropagate from a scalar node; grads accumulate additively."""
        if self.data.size != 1:
            raise ValueError(f"backward() requires a scalar loss, got shape {self.data.shape}")
        # Iterative topological sort; graphs can exceed the recursion limit.
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data), own=True)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # Operator sugar used throughout the nets and tests.
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def tanh(self):
        return tanh(self)

    def sigmoid(self):
        return sigmoid(self)

    def relu(self):
        return relu(self)

    def square(self):
        return square(self)

    def scale(self, s):
        return scale(self, s)

    def sum(self):
        return tsum(self)

    def mean(self):
        return tmean(self)

    def item(self):
        return float(self.data.reshape(-1)[0])


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn(out)
    return out


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatchError(f"matmul shapes do not conform: {a.data.shape} @ {b.data.shape}")
    data = a.data @ b.data

    def backward_fn(out):
        def bw(g):
            if a.requires_grad:
                a._accumulate(g @ b.data.T, own=True)
            if b.requires_grad:
                b._accumulate(a.data.T @ g, own=True)
        return bw

    return _make(data, (a, b), backward_fn)


def add(a, b):
    """Elementwise add; also accepts a (1, n) row bias against an (m, n) tensor."""
    a, b = _as_tensor(a), _as_tensor(b)
    row_bias = (
        a.data.ndim == 2
        and b.data.ndim == 2
        and b.data.shape == (1, a.data.shape[1])
        and a.data.shape[0] != 1
    )
    if a.data.shape != b.data.shape and not row_bias:
        raise ShapeMismatchError(f"add shapes do not conform: {a.data.shape} + {b.data.shape}")
    data = a.data + b.data

    def backward_fn(out):
        def bw(g):
            if a.requires_grad:
                a._accumulate(g)
            if b.requires_grad:
                if row_bias:
                    b._accumulate(g.sum(axis=0, keepdims=True), own=True)
                else:
                    b._accumulate(g)
        return bw

    return _make(data, (a, b), backward_fn)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ShapeMismatchError(f"mul shapes do not conform: {a.data.shape} * {b.data.shape}")
    data = a.data * b.data

    def backward_fn(out):
        def bw(g):
            if a.requires_grad:
                a._accumulate(g * b.data, own=True)
            if b.requires_grad:
                b._accumulate(g * a.data, own=True)
        return bw

    return _make(data, (a, b), backward_fn)


def concat(tensors):
    """Concatenate along the last axis."""
    tensors = [_as_tensor(t) for t in tensors]
    lead = tensors[0].data.shape[:-1]
    for t in tensors[1:]:
        if t.data.shape[:-1] != lead:
            raise ShapeMismatchError(
                f"concat leading dims do not conform: {tensors[0].data.shape} vs {t.data.shape}"
            )
    data = np.concatenate([t.data for t in tensors], axis=-1)
    widths = [t.data.shape[-1] for t in tensors]

    def backward_fn(out):
        def bw(g):
            off = 0
            for t, w in zip(tensors, widths):
                if t.requires_grad:
                    t._accumulate(g[..., off : off + w])
                off += w
        return bw

    return _make(data, tuple(tensors), backward_fn)


def sigmoid(a):
    a = _as_tensor(a)
    s = 1.0 / (1.0 + np.exp(-a.data))

    def backward_fn(out):
        def bw(g):
            a._accumulate(g * (s * (1.0 - s)), own=True)
        return bw

    return _make(s, (a,), backward_fn)


def tanh(a):
    a = _as_tensor(a)
    t = np.tanh(a.data)

    def backward_fn(out):
        def bw(g):
            a._accumulate(g * (1.0 - t * t), own=True)
        return bw

    return _make(t, (a,), backward_fn)


def relu(a):
    a = _as_tensor(a)
    data = np.maximum(a.data, 0.0)

    def backward_fn(out):
        def bw(g):
            a._accumulate(g * (a.data > 0), own=True)
        return bw

    return _make(data, (a,), backward_fn)


def tsum(a):
    a = _as_tensor(a)
    data = np.array([[a.data.sum()]])

    def backward_fn(out):
        def bw(g):
            a._accumulate(np.full_like(a.data, g.reshape(-1)[0]), own=True)
        return bw

    return _make(data, (a,), backward_fn)


def tmean(a):
    a = _as_tensor(a)
    data = np.array([[a.data.mean()]])

    def backward_fn(out):
        def bw(g):
            a._accumulate(np.full_like(a.data, g.reshape(-1)[0] / a.data.size), own=True)
        return bw

    return _make(data, (a,), backward_fn)


def square(a):
    a = _as_tensor(a)
    data = a.data * a.data

    def backward_fn(out):
        def bw(g):
            a._accumulate(g * (2.0 * a.data), own=True)
        return bw

    return _make(data, (a,), backward_fn)


def scale(a, s):
    a = _as_tensor(a)
    s = float(s)
    data = a.data * s

    def backward_fn(out):
        def bw(g):
            a._accumulate(g * s, own=True)
        return bw

    return _make(data, (a,), backward_fn)


def zero_grads(params):
    for p in params:
        p.grad = None


def xavier_uniform(shape, rng):
    """Glorot-uniform init for a 2-d weight matrix."""
    fan_in, fan_out = shape
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class AdamState:
    """Adam with bias correction over a fixed, ordered parameter list."""

    params: list
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        """Apply one Adam update; grads are left untouched for the caller to zero."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        inv1 = 1.0 / (1 - b1 ** self.t)
        inv2 = 1.0 / (1 - b2 ** self.t)
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                raise ValueError("adam step with missing gradient on a parameter")
            g = p.grad
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            denom = np.sqrt(v * inv2)
            denom += self.eps
            update = m * (self.lr * inv1)
            update /= denom
            p.data -= update
