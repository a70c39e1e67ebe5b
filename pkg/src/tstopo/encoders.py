"""Temporal and topological encoders plus the shared-space projection heads."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autograd import Tensor
from .nn import (causal_dilated_conv1d, init_param, linear, masked_max_over_set,
                 masked_mean_over_set, max_over_time, relu)


@dataclass
class TemporalEncoderConfig:
    in_channels: int = 1
    hidden: int = 64
    blocks: int = 6          # dilations 2^0 .. 2^(blocks-1)
    kernel: int = 3
    out_dim: int = 64
    mask_mode: bool = True   # Bernoulli(0.5) timestamp masking during training


@dataclass
class TopoEncoderConfig:
    w1: int = 64
    w2: int = 128
    out_dim: int = 64
    pool: str = "max"        # "max" or "mean" (avg-pool ablation)


@dataclass
class ProjectionConfig:
    dim: int = 32


class TemporalEncoder:
    """Input projection + timestamp masking + residual dilated causal convs.

    Maps a view [.., T, C] to per-timestamp embeddings [.., T, F].  Output
    at t never depends on inputs after t.
    """

    def __init__(self, cfg: TemporalEncoderConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.w_in = init_param((cfg.in_channels, cfg.hidden), cfg.in_channels, rng)
        self.b_in = init_param((cfg.hidden,), cfg.in_channels, rng)
        self.kernels = [init_param((cfg.kernel, cfg.hidden, cfg.hidden),
                                   cfg.kernel * cfg.hidden, rng)
                        for _ in range(cfg.blocks)]
        self.w_out = init_param((cfg.hidden, cfg.out_dim), cfg.hidden, rng)
        self.b_out = init_param((cfg.out_dim,), cfg.hidden, rng)

    def parameters(self) -> list:
        return [self.w_in, self.b_in, *self.kernels, self.w_out, self.b_out]

    def __call__(self, x: Tensor, train: bool = False,
                 mask_rng: np.random.Generator | None = None) -> Tensor:
        h = linear(x, self.w_in, self.b_in)
        if train and self.cfg.mask_mode:
            if mask_rng is None:
                raise ValueError("training forward requires mask_rng")
            keep = mask_rng.random(h.shape[:-1]) < 0.5
            h = h * Tensor(keep[..., None].astype(np.float64))
        for l, kernel in enumerate(self.kernels):
            h = h + relu(causal_dilated_conv1d(h, kernel, dilation=2 ** l))
        return linear(h, self.w_out, self.b_out)


class TopoEncoder:
    """Shared per-point MLP over (birth, death, persistence) rows, then a
    symmetric pooling over the unmasked rows."""

    def __init__(self, cfg: TopoEncoderConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.w1 = init_param((3, cfg.w1), 3, rng)
        self.b1 = init_param((cfg.w1,), 3, rng)
        self.w2 = init_param((cfg.w1, cfg.w2), cfg.w1, rng)
        self.b2 = init_param((cfg.w2,), cfg.w1, rng)
        self.w3 = init_param((cfg.w2, cfg.out_dim), cfg.w2, rng)
        self.b3 = init_param((cfg.out_dim,), cfg.w2, rng)

    def parameters(self) -> list:
        return [self.w1, self.b1, self.w2, self.b2, self.w3, self.b3]

    def __call__(self, rows: Tensor, mask: np.ndarray) -> Tensor:
        h = relu(linear(rows, self.w1, self.b1))
        h = relu(linear(h, self.w2, self.b2))
        h = linear(h, self.w3, self.b3)
        if self.cfg.pool == "mean":
            return masked_mean_over_set(h, mask)
        return masked_max_over_set(h, mask)


class ProjectionHead:
    """Two-layer MLP (linear -> ReLU -> linear) into the shared latent space."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        self.w1 = init_param((in_dim, in_dim), in_dim, rng)
        self.b1 = init_param((in_dim,), in_dim, rng)
        self.w2 = init_param((in_dim, out_dim), in_dim, rng)
        self.b2 = init_param((out_dim,), in_dim, rng)

    def parameters(self) -> list:
        return [self.w1, self.b1, self.w2, self.b2]

    def __call__(self, x: Tensor) -> Tensor:
        return linear(relu(linear(x, self.w1, self.b1)), self.w2, self.b2)


def project_time(head: ProjectionHead, r: Tensor) -> Tensor:
    """Instance-level projection: max over timestamps, then the head."""
    return head(max_over_time(r))


def project_topo(head: ProjectionHead, h: Tensor) -> Tensor:
    return head(h)
