from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def numeric_grad(f: Callable[[], float], x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of ``f`` with respect to ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        hi = f()
        flat[i] = old - eps
        lo = f()
        flat[i] = old
        gflat[i] = (hi - lo) / (2 * eps)
    return g


def rel_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    """Max elementwise |a - b| / max(|a|, |b|, floor).

    The floor keeps exactly-zero gradients from dividing finite-difference
    round-off (about 1e-11 at step 1e-5) by zero.
    """
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def gradcheck(loss_fn: Callable[[], Tensor], inputs: Sequence[Tensor], eps: float = 1e-5) -> float:
    """Largest relative error between backprop and finite differences over ``inputs``.

    ``loss_fn`` must rebuild the graph from the current ``.data`` of the inputs
    and return a scalar tensor.
    """
    for t in inputs:
        t.requires_grad = True
        t.zero_grad()
    loss_fn().backward()
    worst = 0.0
    for t in inputs:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = numeric_grad(lambda: loss_fn().item(), t.data, eps)
        worst = max(worst, rel_error(analytic, numeric))
    return worst
