"""Neural-network primitives on top of the autograd engine.

Layers both encoders need (affine maps, causal dilated convolution,
masked set pooling) plus the Adam optimizer.  Parameter init is
uniform(-s, s) with s = sqrt(1/fan_in), driven by an explicit RNG.
"""
from __future__ import annotations

import numpy as np

from .autograd import Tensor, concat


class ShapeMismatchError(ValueError):
    pass


def init_param(shape: tuple, fan_in: int, rng: np.random.Generator) -> Tensor:
    s = float(np.sqrt(1.0 / max(fan_in, 1)))
    return Tensor(rng.uniform(-s, s, size=shape), requires_grad=True)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map on the trailing axis: x[..., in] @ W[in, out] + b[out]."""
    if x.shape[-1] != weight.shape[0]:
        raise ShapeMismatchError(
            f"linear: input dim {x.shape[-1]} != weight rows {weight.shape[0]}")
    out = x @ weight
    if bias is not None:
        out = out + bias
    return out


def relu(x: Tensor) -> Tensor:
    return x.relu()


def _shift_right(x: Tensor, steps: int) -> Tensor:
    """Shift along the time axis (-2), left-padding with zeros."""
    if steps == 0:
        return x
    t = x.shape[-2]
    pad_shape = x.shape[:-2] + (steps, x.shape[-1])
    pad = Tensor(np.zeros(pad_shape))
    if steps >= t:
        return Tensor(np.zeros(x.shape))
    return concat([pad, x[..., : t - steps, :]], axis=-2)


def causal_dilated_conv1d(x: Tensor, kernel: Tensor, dilation: int = 1) -> Tensor:
    """Causal dilated 1-D convolution.

    x: [..., T, C_in], kernel: [k, C_in, C_out].  Output at t depends only on
    inputs at {t, t - dilation, ..., t - (k-1)*dilation}; missing history is
    zero-padded.
    """
    if dilation < 1 or kernel.ndim != 3:
        raise ShapeMismatchError("conv: kernel must be [k, C_in, C_out], dilation >= 1")
    if x.shape[-1] != kernel.shape[1]:
        raise ShapeMismatchError(
            f"conv: input channels {x.shape[-1]} != kernel C_in {kernel.shape[1]}")
    k = kernel.shape[0]
    out = None
    for tap in range(k):
        term = _shift_right(x, tap * dilation) @ kernel[tap]
        out = term if out is None else out + term
    return out


def masked_max_over_set(x: Tensor, mask: np.ndarray) -> Tensor:
    """Per-feature max over unmasked rows of x[..., M, H].

    mask: boolean [..., M]; rows with mask False never contribute.  If every
    row is masked the result is zeros (empty-set convention).  Gradient goes
    to the argmax row, first index on ties.
    """
    mask = np.asarray(mask, dtype=bool)
    data = x.data
    neg = np.where(mask[..., None], data, -np.inf)
    any_row = mask.any(axis=-1)
    idx = np.argmax(neg, axis=-2)
    out_data = np.take_along_axis(data, idx[..., None, :], axis=-2).squeeze(-2)
    out_data = np.where(any_row[..., None], out_data, 0.0)

    def backward(g):
        g = g * any_row[..., None]
        full = np.zeros(data.shape)
        np.put_along_axis(full, idx[..., None, :], g[..., None, :], axis=-2)
        return (full,)
    if not x.requires_grad:
        return Tensor(out_data)
    return Tensor(out_data, requires_grad=True, _parents=(x,), _backward=backward)


def masked_mean_over_set(x: Tensor, mask: np.ndarray) -> Tensor:
    """Mean over unmasked rows; zeros when every row is masked."""
    mask = np.asarray(mask, dtype=bool)
    weights = mask.astype(np.float64)
    counts = np.maximum(weights.sum(axis=-1, keepdims=True), 1.0)
    w = Tensor(weights[..., None] / counts[..., None])
    return (x * w).sum(axis=-2)


def max_over_time(x: Tensor) -> Tensor:
    """Per-feature max over the time axis of x[..., T, F]; first-index ties."""
    return x.max(axis=-2)


class Adam:
    """Standard Adam with bias correction over a list of parameter Tensors."""

    def __init__(self, params: list[Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.step_count += 1
        t = self.step_count
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            m_hat = self.m[i] / (1 - self.beta1 ** t)
            v_hat = self.v[i] / (1 - self.beta2 ** t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
