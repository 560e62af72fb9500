"""Minimal reverse-mode autodiff over numpy arrays.

Every op records an explicit backward closure; `Tensor.backward()` walks the
tape in reverse topological order. A `no_grad()` context skips tape
construction entirely, which is what the sampling hot path uses. All math is
float64.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable

import numpy as np

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._backward: Callable[[], None] | None = None
        self._parents: tuple[Tensor, ...] = ()

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without an explicit gradient needs a scalar output")
            grad = np.ones_like(self.data)
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.asarray(grad, dtype=np.float64))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward()

    # -- operator sugar -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return slice_(self, idx)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _needs_tape(*tensors: Tensor) -> bool:
    return _grad_enabled and any(t.requires_grad or t._parents for t in tensors)


def _make(data: np.ndarray, parents: Iterable[Tensor], backward: Callable[[], None] | None) -> Tensor:
    out = Tensor(data)
    if backward is not None:
        out._parents = tuple(parents)
        out._backward = backward
        out.requires_grad = True
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to `shape`."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data
    if not _needs_tape(a, b):
        return Tensor(out_data)

    def backward():
        g = out.grad
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(g, b.data.shape))

    out = _make(out_data, (a, b), backward)
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data
    if not _needs_tape(a, b):
        return Tensor(out_data)

    def backward():
        g = out.grad
        a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    out = _make(out_data, (a, b), backward)
    return out


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data @ b.data
    if not _needs_tape(a, b):
        return Tensor(out_data)

    def backward():
        g = out.grad
        a._accumulate(g @ b.data.T)
        b._accumulate(a.data.T @ g)

    out = _make(out_data, (a, b), backward)
    return out


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # exponent clipped at +-500: the result is already exactly 0/1 in float64
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))


def silu(x) -> Tensor:
    x = as_tensor(x)
    sig = _sigmoid(x.data)
    out_data = x.data * sig
    if not _needs_tape(x):
        return Tensor(out_data)

    def backward():
        x._accumulate(out.grad * (sig * (1.0 + x.data * (1.0 - sig))))

    out = _make(out_data, (x,), backward)
    return out


def tanh(x) -> Tensor:
    x = as_tensor(x)
    t = np.tanh(x.data)
    if not _needs_tape(x):
        return Tensor(t)

    def backward():
        x._accumulate(out.grad * (1.0 - t * t))

    out = _make(t, (x,), backward)
    return out


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    s = _sigmoid(x.data)
    if not _needs_tape(x):
        return Tensor(s)

    def backward():
        x._accumulate(out.grad * s * (1.0 - s))

    out = _make(s, (x,), backward)
    return out


def square(x) -> Tensor:
    x = as_tensor(x)
    out_data = x.data * x.data
    if not _needs_tape(x):
        return Tensor(out_data)

    def backward():
        x._accumulate(out.grad * 2.0 * x.data)

    out = _make(out_data, (x,), backward)
    return out


def mean_all(x) -> Tensor:
    x = as_tensor(x)
    out_data = np.array(x.data.mean())
    if not _needs_tape(x):
        return Tensor(out_data)

    def backward():
        x._accumulate(np.full_like(x.data, out.grad / x.data.size))

    out = _make(out_data, (x,), backward)
    return out


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out_data = x.data.reshape(shape)
    if not _needs_tape(x):
        return Tensor(out_data)

    def backward():
        x._accumulate(out.grad.reshape(x.data.shape))

    out = _make(out_data, (x,), backward)
    return out


def transpose(x, axes) -> Tensor:
    x = as_tensor(x)
    out_data = x.data.transpose(axes)
    if not _needs_tape(x):
        return Tensor(out_data)

    inv = np.argsort(axes)

    def backward():
        x._accumulate(out.grad.transpose(inv))

    out = _make(out_data, (x,), backward)
    return out


def concat(tensors, axis: int) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in ts], axis=axis)
    if not _needs_tape(*ts):
        return Tensor(out_data)

    sizes = [t.data.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def backward():
        g = out.grad
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            t._accumulate(g[tuple(idx)])

    out = _make(out_data, ts, backward)
    return out


def slice_(x, idx) -> Tensor:
    x = as_tensor(x)
    out_data = x.data[idx]
    if not _needs_tape(x):
        return Tensor(out_data)

    def backward():
        g = np.zeros_like(x.data)
        g[idx] = out.grad
        x._accumulate(g)

    out = _make(out_data, (x,), backward)
    return out


def conv1d(x, w, b, pad: int = 1) -> Tensor:
    """1D convolution over (B, C_in, T) with kernel (C_out, C_in, k), zero padding."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    B, C_in, T = x.data.shape
    C_out, C_in_w, k = w.data.shape
    if C_in != C_in_w:
        raise ValueError(f"conv1d channel mismatch: input {C_in}, kernel {C_in_w}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad))) if pad else x.data
    T_out = T + 2 * pad - k + 1
    # im2col: (B, T_out, C_in * k)
    cols = np.empty((B, T_out, C_in * k))
    for j in range(k):
        cols[:, :, j::k] = xp[:, :, j : j + T_out].transpose(0, 2, 1)
    w_mat = w.data.transpose(1, 2, 0).reshape(C_in * k, C_out)  # rows ordered (channel, tap)
    out_data = (cols.reshape(B * T_out, C_in * k) @ w_mat).reshape(B, T_out, C_out).transpose(0, 2, 1)
    out_data = out_data + b.data[None, :, None]
    if not _needs_tape(x, w, b):
        return Tensor(out_data)

    def backward():
        g = out.grad  # (B, C_out, T_out)
        g_mat = g.transpose(0, 2, 1).reshape(B * T_out, C_out)
        gw = (cols.reshape(B * T_out, C_in * k).T @ g_mat).reshape(C_in, k, C_out).transpose(2, 0, 1)
        w._accumulate(gw)
        b._accumulate(g.sum(axis=(0, 2)))
        gcols = (g_mat @ w_mat.T).reshape(B, T_out, C_in * k)
        gxp = np.zeros_like(xp)
        for j in range(k):
            gxp[:, :, j : j + T_out] += gcols[:, :, j::k].transpose(0, 2, 1)
        x._accumulate(gxp[:, :, pad : pad + T] if pad else gxp)

    out = _make(out_data, (x, w, b), backward)
    return out


def avg_pool1d_2(x) -> Tensor:
    """Average pooling with kernel 2, stride 2 over (B, C, T); odd T replicates the last column."""
    x = as_tensor(x)
    B, C, T = x.data.shape
    odd = T % 2 == 1
    xd = np.concatenate([x.data, x.data[:, :, -1:]], axis=2) if odd else x.data
    T2 = xd.shape[2] // 2
    out_data = 0.5 * (xd[:, :, 0::2] + xd[:, :, 1::2])
    if not _needs_tape(x):
        return Tensor(out_data)

    def backward():
        g = out.grad
        gx = np.zeros((B, C, T2 * 2))
        gx[:, :, 0::2] = 0.5 * g
        gx[:, :, 1::2] = 0.5 * g
        if odd:
            gx[:, :, T - 1] += gx[:, :, T]
            gx = gx[:, :, :T]
        x._accumulate(gx)

    out = _make(out_data, (x,), backward)
    return out


def upsample1d_2(x, target_len: int) -> Tensor:
    """Nearest-neighbour 2x upsampling over (B, C, T), cropped to `target_len`."""
    x = as_tensor(x)
    B, C, T = x.data.shape
    if not T <= target_len <= 2 * T:
        raise ValueError(f"target_len {target_len} not reachable from {T} by 2x upsampling")
    out_data = np.repeat(x.data, 2, axis=2)[:, :, :target_len]
    if not _needs_tape(x):
        return Tensor(out_data)

    def backward():
        g = np.zeros((B, C, 2 * T))
        g[:, :, :target_len] = out.grad
        x._accumulate(g[:, :, 0::2] + g[:, :, 1::2])

    out = _make(out_data, (x,), backward)
    return out


def affine(x, w, b) -> Tensor:
    """x @ w + b for x of shape (B, D_in)."""
    return add(matmul(x, w), b)
