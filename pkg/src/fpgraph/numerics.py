"""Dense math substrate: matrix product, activations, loss, optimizer, and a
finite-difference gradient oracle.

Everything works on float64 and is deterministic: same inputs give
bit-identical outputs. Reductions run in fixed (row-major) order, so results
are reproducible across runs and across the two kernel backends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable

import numpy as np

from . import backend


@dataclass(frozen=True)
class ActivationConfig:
    """LeakyReLU negative-input slope; 0.2 unless configured otherwise."""

    leaky_slope: float = 0.2

    def __post_init__(self):
        if not (0.0 < self.leaky_slope < 1.0):
            raise ValueError(f"leaky_slope must be in (0, 1), got {self.leaky_slope}")


@dataclass
class ParamTensor:
    """A trainable array paired with its gradient accumulator."""

    value: np.ndarray
    grad: np.ndarray
    name: str

    @classmethod
    def create(cls, value: np.ndarray, name: str) -> "ParamTensor":
        value = np.asarray(value, dtype=np.float64)
        return cls(value=value, grad=np.zeros_like(value), name=name)

    def zero_grad(self) -> None:
        self.grad.fill(0.0)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with row-major accumulation order.

    Matches a naive triple loop exactly (0 ULP), which keeps results
    independent of any BLAS build.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D arrays, got {a.ndim}-D and {b.ndim}-D")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return backend.matmul(a, b)


def leaky_relu(x, cfg: ActivationConfig = ActivationConfig()):
    """x for x >= 0, slope*x otherwise; works on scalars and arrays."""
    if np.isscalar(x) or isinstance(x, float):
        return x if x >= 0.0 else cfg.leaky_slope * x
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0.0, x, cfg.leaky_slope * x)


def sigmoid(x: float) -> float:
    """Logistic function with the numerically stable branch for x < 0."""
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax over the entries where ``mask`` is true; zeros elsewhere.

    Uses max-subtraction, so arbitrarily large logits stay finite.
    """
    logits = np.asarray(logits, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if logits.shape != mask.shape:
        raise ValueError(f"shape mismatch: logits {logits.shape}, mask {mask.shape}")
    if not mask.any():
        raise ValueError("masked_softmax over an empty neighborhood")
    out = np.zeros_like(logits)
    sel = logits[mask]
    sel = np.exp(sel - sel.max())
    out[mask] = sel / sel.sum()
    return out


def cross_entropy(logits: np.ndarray, label: int):
    """Two-class softmax cross-entropy.

    Returns (loss, grad_logits) where grad_logits = softmax(logits) - onehot.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape != (2,):
        raise ValueError(f"expected 2 logits, got shape {logits.shape}")
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label}")
    m = logits.max()
    shifted = logits - m
    logsumexp = m + math.log(np.exp(shifted).sum())
    loss = logsumexp - logits[label]
    grad = np.exp(logits - logsumexp)
    grad[label] -= 1.0
    return float(loss), grad


@dataclass
class AdamState:
    """First/second moment buffers, one pair per parameter name."""

    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    param: ParamTensor,
    state: AdamState,
    lr: float,
    t: int,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One Adam update (with bias correction) applied in place to ``param``."""
    if lr <= 0.0:
        raise ValueError(f"lr must be positive, got {lr}")
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    g = param.grad
    if param.name not in state.m:
        state.m[param.name] = np.zeros_like(g)
        state.v[param.name] = np.zeros_like(g)
    m = state.m[param.name]
    v = state.v[param.name]
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    param.value -= lr * m_hat / (np.sqrt(v_hat) + eps)


def finite_diff_grad(
    f: Callable[[], float],
    params: Iterable[ParamTensor],
    h: float = 1e-5,
) -> Dict[str, np.ndarray]:
    """Central-difference gradient of ``f`` w.r.t. every parameter coordinate.

    ``f`` is re-evaluated with each coordinate nudged by +/-h; parameter
    values are restored afterwards. The oracle every analytic backward pass
    is checked against.
    """
    if h <= 0.0:
        raise ValueError(f"h must be positive, got {h}")
    grads: Dict[str, np.ndarray] = {}
    for p in params:
        flat = p.value.reshape(-1)
        g = np.empty_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = f()
            flat[i] = orig - h
            f_minus = f()
            flat[i] = orig
            g[i] = (f_plus - f_minus) / (2.0 * h)
        grads[p.name] = g.reshape(p.value.shape)
    return grads
