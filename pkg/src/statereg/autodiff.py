"""Minimal reverse-mode automatic differentiation over numpy arrays.

Only the operations the attention auto-encoder needs: broadcast arithmetic,
stacked-head linear maps, row gather, segment sum, pointwise nonlinearities,
and means. Every op records its inputs and a backward closure on a dynamic
tape; ``backward`` replays the tape in reverse topological order and
accumulates into ``.grad``. All data is float64.
"""

from __future__ import annotations

import numpy as np

_grad_enabled = True


class no_grad:
    """Context manager that disables tape recording (forward-only)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents=(), backward=None):
        self.data = data if isinstance(data, np.ndarray) and data.dtype == np.float64 \
            else np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self._parents = parents if _grad_enabled else ()
        self._backward = backward if _grad_enabled else None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

    def __add__(self, other):
        return add(self, _wrap(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __neg__(self):
        return mul(self, _wrap(-1.0))


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _acc(t: Tensor, g: np.ndarray) -> None:
    t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def backward(root: Tensor, seed: np.ndarray | None = None) -> None:
    """Accumulate d(root)/d(leaf) into every reachable Tensor's ``.grad``."""
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            stack.append((parent, False))
    root.grad = np.ones_like(root.data) if seed is None else np.asarray(seed, dtype=np.float64)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# --------------------------------------------------------------------------
# Operations

def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data
    if not _grad_enabled:
        return Tensor(data)

    def bw(g):
        _acc(a, _unbroadcast(g, a.data.shape))
        _acc(b, _unbroadcast(g, b.data.shape))

    return Tensor(data, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    data = a.data - b.data
    if not _grad_enabled:
        return Tensor(data)

    def bw(g):
        _acc(a, _unbroadcast(g, a.data.shape))
        _acc(b, _unbroadcast(-g, b.data.shape))

    return Tensor(data, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data
    if not _grad_enabled:
        return Tensor(data)

    def bw(g):
        _acc(a, _unbroadcast(g * b.data, a.data.shape))
        _acc(b, _unbroadcast(g * a.data, b.data.shape))

    return Tensor(data, (a, b), bw)


def div(a: Tensor, b: Tensor) -> Tensor:
    data = a.data / b.data
    if not _grad_enabled:
        return Tensor(data)

    def bw(g):
        _acc(a, _unbroadcast(g / b.data, a.data.shape))
        _acc(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return Tensor(data, (a, b), bw)


def relu(a: Tensor) -> Tensor:
    data = np.maximum(a.data, 0.0)
    if not _grad_enabled:
        return Tensor(data)

    def bw(g):
        _acc(a, g * (a.data > 0.0))

    return Tensor(data, (a,), bw)


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    # evaluate exp only on the branch where it cannot overflow
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    data = _stable_sigmoid(a.data)
    if not _grad_enabled:
        return Tensor(data)

    def bw(g):
        _acc(a, g * data * (1.0 - data))

    return Tensor(data, (a,), bw)


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)
    if not _grad_enabled:
        return Tensor(data)

    def bw(g):
        _acc(a, g * data)

    return Tensor(data, (a,), bw)


def log(a: Tensor) -> Tensor:
    data = np.log(a.data)
    if not _grad_enabled:
        return Tensor(data)

    def bw(g):
        _acc(a, g / a.data)

    return Tensor(data, (a,), bw)


def linear_heads(w: Tensor, x: Tensor) -> Tensor:
    """Per-head linear map: w (H, d_out, d_in) applied to x (n, d_in),
    producing (n, H, d_out)."""
    heads, d_out, d_in = w.data.shape
    if x.data.shape[1] != d_in:
        raise ValueError(
            f"feature width {x.data.shape[1]} does not match weight d_in {d_in}"
        )
    n = x.data.shape[0]
    w2 = w.data.reshape(heads * d_out, d_in)
    data = (x.data @ w2.T).reshape(n, heads, d_out)
    if not _grad_enabled:
        return Tensor(data)

    def bw(g):
        g2 = g.reshape(n, heads * d_out)
        _acc(w, (g2.T @ x.data).reshape(heads, d_out, d_in))
        _acc(x, g2 @ w2)

    return Tensor(data, (w, x), bw)


def head_dot(s: Tensor, v: Tensor) -> Tensor:
    """Per-head inner product: s (n, H, d) with v (H, d) giving (n, H)."""
    if s.data.shape[1:] != v.data.shape:
        raise ValueError(f"head shapes differ: {s.data.shape[1:]} vs {v.data.shape}")
    data = (s.data * v.data[None, :, :]).sum(axis=2)
    if not _grad_enabled:
        return Tensor(data)

    def bw(g):
        _acc(s, g[:, :, None] * v.data[None, :, :])
        _acc(v, (g[:, :, None] * s.data).sum(axis=0))

    return Tensor(data, (s, v), bw)


def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    """Select rows along axis 0: out[e] = x[idx[e]]."""
    data = x.data[idx]
    if not _grad_enabled:
        return Tensor(data)

    def bw(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, idx, g)
        _acc(x, gx)

    return Tensor(data, (x,), bw)


def segment_sum(x: Tensor, idx: np.ndarray, num_segments: int) -> Tensor:
    """Scatter-add rows into segments: out[k] = sum of x[e] where idx[e] == k."""
    data = np.zeros((num_segments,) + x.data.shape[1:], dtype=np.float64)
    np.add.at(data, idx, x.data)
    if not _grad_enabled:
        return Tensor(data)

    def bw(g):
        _acc(x, g[idx])

    return Tensor(data, (x,), bw)


def unsqueeze(x: Tensor, axis: int) -> Tensor:
    data = np.expand_dims(x.data, axis)
    if not _grad_enabled:
        return Tensor(data)

    def bw(g):
        _acc(x, g.reshape(x.data.shape))

    return Tensor(data, (x,), bw)


def mean(x: Tensor, axis: int | None = None) -> Tensor:
    data = x.data.mean(axis=axis)
    if not _grad_enabled:
        return Tensor(data)

    if axis is None:
        scale = x.data.size

        def bw(g):
            _acc(x, np.broadcast_to(g / scale, x.data.shape))
    else:
        scale = x.data.shape[axis]

        def bw(g):
            _acc(x, np.broadcast_to(np.expand_dims(g / scale, axis), x.data.shape))

    return Tensor(data, (x,), bw)
