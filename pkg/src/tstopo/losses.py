"""Contrastive losses: temporal, instance, hierarchical, and cross-modal.

All formulas use the positive pair's own term inside the denominator, so
every loss is >= 0 and degenerates to exactly 0 when there is nothing to
contrast against (B = 1 and/or T = 1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autograd import Tensor, concat, logsumexp, maximum


class ZeroNormError(ArithmeticError):
    """A zero-norm embedding reached the cosine similarity (dead encoder)."""


@dataclass
class LossConfig:
    alpha: float = 0.5   # cross-modal weight
    tau: float = 0.1     # cross-modal temperature
    pool_kernel: int = 2  # hierarchy pooling kernel (fixed)


@dataclass
class BatchViews:
    """Per-batch embeddings aligned to the crop overlap."""
    r: Tensor        # [B, T', F] view-a embeddings
    r_prime: Tensor  # [B, T', F] view-b embeddings
    z: Tensor        # [B, D] projection of view a
    z_prime: Tensor  # [B, D] projection of view b
    y: Tensor        # [B, D] projection of the topological embedding


def _diag_mask(t: int) -> Tensor:
    mask = np.zeros((t, t))
    np.fill_diagonal(mask, -np.inf)
    return Tensor(mask)


def _eye(t: int) -> Tensor:
    return Tensor(np.eye(t))


def _nce(anchor_pos: Tensor, cross: Tensor, self_sim: Tensor) -> Tensor:
    """-log exp(pos) / (sum exp(cross) + sum_{off-diag} exp(self))."""
    t = cross.shape[-1]
    stacked = concat([cross, self_sim + _diag_mask(t)], axis=-1)
    return (logsumexp(stacked, axis=-1) - anchor_pos).mean()


def temporal_contrast(r: Tensor, r_prime: Tensor) -> Tensor:
    """Contrast timestamps within each instance across the two views."""
    t = r.shape[-2]
    cross = r @ r_prime.swapaxes(-1, -2)   # [B, T, T]
    self_sim = r @ r.swapaxes(-1, -2)
    pos = (cross * _eye(t)).sum(axis=-1)
    return _nce(pos, cross, self_sim)


def instance_contrast(r: Tensor, r_prime: Tensor) -> Tensor:
    """Contrast instances within each timestamp across the two views."""
    rt = r.swapaxes(0, 1)                  # [T, B, F]
    rpt = r_prime.swapaxes(0, 1)
    b = rt.shape[-2]
    cross = rt @ rpt.swapaxes(-1, -2)      # [T, B, B]
    self_sim = rt @ rt.swapaxes(-1, -2)
    pos = (cross * _eye(b)).sum(axis=-1)
    return _nce(pos, cross, self_sim)


def time_loss_level(r: Tensor, r_prime: Tensor) -> Tensor:
    return temporal_contrast(r, r_prime) + instance_contrast(r, r_prime)


def _pool_time(x: Tensor) -> Tensor:
    """Max-pool along time, kernel 2 stride 2; an odd tail is kept as-is."""
    t = x.shape[-2]
    even = t - (t % 2)
    pooled = maximum(x[..., 0:even:2, :], x[..., 1:even:2, :])
    if t % 2:
        pooled = concat([pooled, x[..., t - 1: t, :]], axis=-2)
    return pooled


def hierarchical_time_loss(r: Tensor, r_prime: Tensor) -> Tensor:
    """Mean of `time_loss_level` over successively max-pooled resolutions."""
    levels = []
    while True:
        levels.append(time_loss_level(r, r_prime))
        if r.shape[-2] <= 1:
            break
        r = _pool_time(r)
        r_prime = _pool_time(r_prime)
    total = levels[0]
    for lv in levels[1:]:
        total = total + lv
    return total * (1.0 / len(levels))


def _normalize_rows(x: Tensor, what: str) -> Tensor:
    sq = (x * x).sum(axis=-1, keepdims=True)
    if np.any(sq.data <= 0.0):
        raise ZeroNormError(f"zero-norm {what} vector: cosine similarity undefined")
    return x * sq.pow(-0.5)


def cross_modal_loss(z: Tensor, z_prime: Tensor, y: Tensor, tau: float) -> Tensor:
    """Symmetrized InfoNCE between averaged time projections and topology
    projections, with cosine similarities scaled by 1/tau."""
    if tau <= 0:
        raise ValueError("tau must be > 0")
    za = (z + z_prime) * 0.5
    zan = _normalize_rows(za, "time")
    yn = _normalize_rows(y, "topology")
    inv_tau = 1.0 / tau
    b = zan.shape[0]
    s_zy = (zan @ yn.swapaxes(-1, -2)) * inv_tau  # [B, B]
    s_zz = (zan @ zan.swapaxes(-1, -2)) * inv_tau
    s_yy = (yn @ yn.swapaxes(-1, -2)) * inv_tau
    pos = (s_zy * _eye(b)).sum(axis=-1)
    fwd = logsumexp(concat([s_zy, s_zz + _diag_mask(b)], axis=-1), axis=-1) - pos
    bwd = logsumexp(concat([s_zy.swapaxes(-1, -2), s_yy + _diag_mask(b)],
                           axis=-1), axis=-1) - pos
    return (fwd + bwd).sum() * (1.0 / (2 * b))


def total_loss(batch: BatchViews, cfg: LossConfig) -> Tensor:
    """Hierarchical time loss plus alpha-weighted cross-modal alignment.

    With alpha = 0 the topological branch is skipped entirely, so its
    parameters receive no gradient at all.
    """
    time_part = hierarchical_time_loss(batch.r, batch.r_prime)
    if cfg.alpha == 0:
        return time_part
    cross = cross_modal_loss(batch.z, batch.z_prime, batch.y, cfg.tau)
    return time_part + cfg.alpha * cross
