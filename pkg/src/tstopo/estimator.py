"""Scikit-learn style estimator facade around the training pipeline."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .data import Dataset, TimeSeriesInstance
from .training import RunConfig, encode_dataset, train_model


def _validate_series(x) -> np.ndarray:
    """Accept [N, T] or [N, T, C]; return float64 [N, T, C]."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.ndim != 3:
        raise ValueError("expected an array of shape [N, T] or [N, T, C]")
    if x.shape[1] < 2:
        raise ValueError("series must have at least 2 timestamps")
    if not np.isfinite(x).all():
        raise ValueError("input contains NaN or inf")
    return x


class TopoContrastiveEncoder(BaseEstimator, TransformerMixin):
    """Self-supervised time series encoder with topology alignment.

    fit() pretrains a temporal encoder jointly with a persistence-diagram
    encoder; transform() returns frozen instance-level representations
    suitable for any downstream sklearn classifier.
    """

    def __init__(self, epochs: int = 20, batch_size: int = 8, lr: float = 1e-3,
                 alpha: float = 0.5, tau: float = 0.1, hidden: int = 64,
                 blocks: int = 6, kernel: int = 3, out_dim: int = 64,
                 proj_dim: int = 32, capacity: int = 64, embed_m: int = 2,
                 embed_gamma: int = 0, seed: int = 42):
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.alpha = alpha
        self.tau = tau
        self.hidden = hidden
        self.blocks = blocks
        self.kernel = kernel
        self.out_dim = out_dim
        self.proj_dim = proj_dim
        self.capacity = capacity
        self.embed_m = embed_m
        self.embed_gamma = embed_gamma
        self.seed = seed

    def _run_config(self) -> RunConfig:
        return RunConfig.from_dict({
            "seed": self.seed, "epochs": self.epochs,
            "batch_size": self.batch_size, "lr": self.lr,
            "temporal": {"hidden": self.hidden, "blocks": self.blocks,
                         "kernel": self.kernel, "out_dim": self.out_dim},
            "proj": {"dim": self.proj_dim},
            "loss": {"alpha": self.alpha, "tau": self.tau},
            "tda": {"m": self.embed_m, "gamma": self.embed_gamma,
                    "capacity": self.capacity},
        })

    def fit(self, X, y=None):
        x = _validate_series(X)
        instances = [TimeSeriesInstance(values=x[i], label=None, id=i)
                     for i in range(x.shape[0])]
        ds = Dataset(name="estimator", train=instances, test=[])
        cfg = self._run_config()
        self.model_, self.history_ = train_model(ds, cfg)
        self.n_features_out_ = self.out_dim
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise RuntimeError("fit must be called before transform")
        x = _validate_series(X)
        instances = [TimeSeriesInstance(values=x[i], label=None, id=i)
                     for i in range(x.shape[0])]
        return encode_dataset(self.model_, instances)
