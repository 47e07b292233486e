"""Float64 tensors with reverse-mode differentiation.

Only the operations the encoder and the recurrent baselines need are
provided. Every op returns a new :class:`Tensor` whose ``_backward`` closure
accumulates into the ``grad`` of its inputs; :meth:`Tensor.backward` runs the
closures in reverse topological order.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class ShapeError(ValueError):
    def __init__(self, op: str, *shapes):
        self.op = op
        self.shapes = shapes
        super().__init__(f"{op}: incompatible shapes " + " and ".join(str(tuple(s)) for s in shapes))


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None,
                 _parents: tuple["Tensor", ...] = ()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward: Callable[[np.ndarray], None] | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar tensor")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            stack.extend((p, False) for p in node._parents)
        self._accumulate(grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _result(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    req = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=req, _parents=tuple(parents) if req else ())
    if req:
        out._backward = backward
    return out


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# -- elementwise / structural -------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError("add", a.shape, b.shape)

    def back(g):
        a._accumulate(g)
        b._accumulate(g)

    return _result(a.data + b.data, (a, b), back)


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """``x + bias`` with ``bias`` broadcast along the last axis."""
    if bias.data.ndim != 1 or x.shape[-1:] != bias.shape:
        raise ShapeError("add_bias", x.shape, bias.shape)

    def back(g):
        x._accumulate(g)
        bias._accumulate(g.reshape(-1, g.shape[-1]).sum(axis=0))

    return _result(x.data + bias.data, (x, bias), back)


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return _result(x.data * c, (x,), lambda g: x._accumulate(g * c))


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        data = x.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", x.shape, tuple(shape)) from None
    return _result(data, (x,), lambda g: x._accumulate(g.reshape(x.shape)))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    if sorted(axes) != list(range(x.data.ndim)):
        raise ShapeError("transpose", x.shape, axes)
    inv = tuple(np.argsort(axes))
    return _result(x.data.transpose(axes), (x,), lambda g: x._accumulate(g.transpose(inv)))


def select(x: Tensor, index: int, axis: int) -> Tensor:
    """``x`` indexed at ``index`` along ``axis`` (that axis is dropped)."""
    data = np.take(x.data, index, axis=axis)

    def back(g):
        full = np.zeros_like(x.data)
        sl = [slice(None)] * x.data.ndim
        sl[axis] = index
        full[tuple(sl)] = g
        x._accumulate(full)

    return _result(data, (x,), back)


def gather_rows(x: Tensor, rows: np.ndarray) -> Tensor:
    """Rows of a 2-D tensor picked by integer index (repeats allowed)."""
    rows = np.asarray(rows, dtype=np.int64)
    if x.data.ndim != 2:
        raise ShapeError("gather_rows", x.shape, rows.shape)

    def back(g):
        full = np.zeros_like(x.data)
        np.add.at(full, rows, g)
        x._accumulate(full)

    return _result(x.data[rows], (x,), back)


def concat(xs: Sequence[Tensor], axis: int = -1) -> Tensor:
    data = np.concatenate([t.data for t in xs], axis=axis)
    sizes = np.cumsum([t.shape[axis] for t in xs])[:-1]

    def back(g):
        for t, part in zip(xs, np.split(g, sizes, axis=axis)):
            t._accumulate(part)

    return _result(data, tuple(xs), back)


def contract(x: Tensor, weights: np.ndarray) -> Tensor:
    """Scalar ``sum(x * weights)`` for a constant ``weights`` array."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != x.shape:
        raise ShapeError("contract", x.shape, w.shape)
    return _result(np.array(np.sum(x.data * w)), (x,), lambda g: x._accumulate(g * w))


# -- linear algebra -----------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """``a @ b`` for ``a`` of shape (..., m, k) and ``b`` of shape (k, n) or (..., k, n)."""
    if a.data.ndim < 2 or b.data.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    if b.data.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise ShapeError("matmul", a.shape, b.shape)

    def back(g):
        if a.requires_grad:
            a._accumulate(g @ np.swapaxes(b.data, -1, -2))
        if b.requires_grad:
            if b.data.ndim == 2:
                k, n = b.shape
                b._accumulate(a.data.reshape(-1, k).T @ g.reshape(-1, n))
            else:
                b._accumulate(np.swapaxes(a.data, -1, -2) @ g)

    return _result(a.data @ b.data, (a, b), back)


# -- nonlinearities -----------------------------------------------------------

def gelu(x: Tensor) -> Tensor:
    """Exact (erf) GELU."""
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
    return _result(x.data * cdf, (x,), lambda g: x._accumulate(g * (cdf + x.data * pdf)))


def softmax(x: Tensor, axis: int = -1, additive_mask: np.ndarray | None = None) -> Tensor:
    """Softmax along ``axis``; ``additive_mask`` (0 or -inf, broadcastable) is added first.

    Positions masked with -inf get exactly zero probability.
    """
    z = x.data if additive_mask is None else x.data + additive_mask
    zmax = np.max(z, axis=axis, keepdims=True)
    if not np.all(np.isfinite(zmax)):
        raise ValueError("softmax: a row is entirely masked")
    e = np.exp(z - zmax)
    y = e / np.sum(e, axis=axis, keepdims=True)

    def back(g):
        x._accumulate(y * (g - np.sum(g * y, axis=axis, keepdims=True)))

    return _result(y, (x,), back)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    if eps <= 0:
        raise ValueError("layer_norm: eps must be positive")
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError("layer_norm", x.shape, gain.shape, bias.shape)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv

    def back(g):
        if gain.requires_grad:
            gain._accumulate((g * xhat).reshape(-1, d).sum(axis=0))
        if bias.requires_grad:
            bias._accumulate(g.reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            gh = g * gain.data
            x._accumulate(inv * (gh - gh.mean(axis=-1, keepdims=True)
                                 - xhat * np.mean(gh * xhat, axis=-1, keepdims=True)))

    return _result(xhat * gain.data + bias.data, (x, gain, bias), back)


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; identity when ``rate == 0`` or ``rng`` is None (eval mode)."""
    if rng is None or rate <= 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _result(x.data * keep, (x,), lambda g: x._accumulate(g * keep))


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    ids = np.asarray(ids)
    if ids.dtype.kind not in "iu":
        raise TypeError("embedding ids must be integers")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding id outside [0, {table.shape[0]})")

    def back(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        table._accumulate(full)

    return _result(table.data[ids], (table,), back)


# -- losses -------------------------------------------------------------------

def log_softmax_np(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def cross_entropy(logits: Tensor, targets: np.ndarray, ignore_index: int = -100) -> Tensor:
    """Mean negative log-likelihood over rows whose target is not ``ignore_index``."""
    targets = np.asarray(targets, dtype=np.int64)
    if logits.data.ndim != 2 or targets.shape != logits.shape[:1]:
        raise ShapeError("cross_entropy", logits.shape, targets.shape)
    valid = targets != ignore_index
    n = int(valid.sum())
    logp = log_softmax_np(logits.data)
    rows = np.flatnonzero(valid)
    loss = -logp[rows, targets[rows]].sum() / n if n else 0.0

    def back(g):
        if n == 0:
            return
        grad = np.exp(logp)
        grad[rows, targets[rows]] -= 1.0
        grad[~valid] = 0.0
        logits._accumulate(grad * (g / n))

    return _result(np.array(loss), (logits,), back)


# -- recurrent ----------------------------------------------------------------

def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def lstm(x: Tensor, valid: np.ndarray, w_in: Tensor, w_rec: Tensor, bias: Tensor,
         reverse: bool = False) -> Tensor:
    """One LSTM layer over (B, T, D) inputs; returns hidden states (B, T, H).

    Gate order in the 4H axis is input, forget, cell, output. Steps where
    ``valid`` is False leave the state untouched, so padding is skipped and
    the state after the last processed step is the output at position T-1
    (or 0 when ``reverse``).
    """
    B, T, D = x.shape
    H = w_rec.shape[0]
    if w_in.shape != (D, 4 * H) or w_rec.shape != (H, 4 * H) or bias.shape != (4 * H,):
        raise ShapeError("lstm", x.shape, w_in.shape, w_rec.shape, bias.shape)
    valid = np.asarray(valid, dtype=bool)
    if valid.shape != (B, T):
        raise ShapeError("lstm", x.shape, valid.shape)
    m_all = valid[..., None].astype(np.float64)
    steps = range(T - 1, -1, -1) if reverse else range(T)

    h = np.zeros((B, H))
    c = np.zeros((B, H))
    out = np.zeros((B, T, H))
    cache = []
    xw = x.data @ w_in.data + bias.data  # (B, T, 4H)
    for t in steps:
        z = xw[:, t] + h @ w_rec.data
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = _sigmoid(z[:, 3 * H:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        m = m_all[:, t]
        cache.append((t, h, c, i, f, g, o, tc, m))
        c = m * c_new + (1 - m) * c
        h = m * h_new + (1 - m) * h
        out[:, t] = h

    def back(gout):
        dxw = np.zeros_like(xw)
        dw_rec = np.zeros_like(w_rec.data)
        dh = np.zeros((B, H))
        dc = np.zeros((B, H))
        for t, h_prev, c_prev, i, f, g, o, tc, m in reversed(cache):
            dh = dh + gout[:, t]
            dh_new = m * dh
            dc_new = m * dc + dh_new * o * (1 - tc * tc)
            do = dh_new * tc
            df = dc_new * c_prev
            di = dc_new * g
            dg = dc_new * i
            dz = np.concatenate(
                [di * i * (1 - i), df * f * (1 - f), dg * (1 - g * g), do * o * (1 - o)], axis=1)
            dxw[:, t] = dz
            dw_rec += h_prev.T @ dz
            dc = dc_new * f + (1 - m) * dc
            dh = dz @ w_rec.data.T + (1 - m) * dh
        if x.requires_grad:
            x._accumulate(dxw @ w_in.data.T)
        if w_in.requires_grad:
            w_in._accumulate(x.data.reshape(-1, D).T @ dxw.reshape(-1, 4 * H))
        if w_rec.requires_grad:
            w_rec._accumulate(dw_rec)
        if bias.requires_grad:
            bias._accumulate(dxw.reshape(-1, 4 * H).sum(axis=0))

    return _result(out, (x, w_in, w_rec, bias), back)
