"""Dataset loading, synthetic data generation, normalization, splits,
and the frozen-representation linear probe."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class TimeSeriesInstance:
    values: np.ndarray          # [T, C]
    label: int | None
    id: int

    @property
    def t(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]


@dataclass
class Dataset:
    name: str
    train: list = field(default_factory=list)
    test: list = field(default_factory=list)
    n_classes: int = 0
    norm_mean: np.ndarray | None = None
    norm_std: np.ndarray | None = None

    @property
    def instances(self) -> list:
        return self.train + self.test


def _interpolate_missing(values: np.ndarray, row: int) -> np.ndarray:
    """Linear interpolation of NaNs; leading/trailing NaNs copy the nearest
    valid value."""
    out = values.copy()
    for c in range(out.shape[1]):
        col = out[:, c]
        bad = np.isnan(col)
        if not bad.any():
            continue
        good = ~bad
        if not good.any():
            raise DataError(f"row {row}: channel {c} has no valid values")
        idx = np.arange(len(col))
        out[:, c] = np.interp(idx, idx[good], col[good])
    return out


def _parse_row(line: str, row: int) -> tuple:
    sep = "\t" if "\t" in line else ","
    fields = [f.strip() for f in line.split(sep)]
    if len(fields) < 2:
        raise DataError(f"row {row}: expected a label and at least one value")
    try:
        label = float(fields[0])
    except ValueError as exc:
        raise DataError(f"row {row}, column 1: bad label {fields[0]!r}") from exc
    values = np.empty(len(fields) - 1)
    for col, f in enumerate(fields[1:], start=2):
        if f in ("", "NaN", "nan", "?"):
            values[col - 2] = np.nan
            continue
        try:
            values[col - 2] = float(f)
        except ValueError as exc:
            raise DataError(f"row {row}, column {col}: bad value {f!r}") from exc
    return label, values


def _read_tsv(path) -> tuple:
    labels, series = [], []
    with open(path) as fh:
        for row, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            label, values = _parse_row(line, row)
            labels.append(label)
            series.append(values)
    if not labels:
        raise DataError(f"{path}: empty file")
    return labels, series


def _remap_labels(raw: list) -> tuple:
    classes = sorted(set(raw))
    mapping = {c: i for i, c in enumerate(classes)}
    return [mapping[r] for r in raw], len(classes)


def load_ucr_tsv(train_path, test_path=None, name: str = "ucr") -> Dataset:
    """Load univariate UCR-style TSV/CSV files (label first, values after).

    Labels are remapped to 0..K-1 preserving their sorted original order;
    missing values are linearly interpolated.
    """
    raw_labels, raw_series = _read_tsv(train_path)
    n_train = len(raw_labels)
    if test_path is not None:
        tl, ts = _read_tsv(test_path)
        raw_labels += tl
        raw_series += ts
    labels, n_classes = _remap_labels(raw_labels)
    ds = Dataset(name=name, n_classes=n_classes)
    for i, (label, vals) in enumerate(zip(labels, raw_series)):
        values = _interpolate_missing(vals[:, None], row=i + 1)
        inst = TimeSeriesInstance(values=values, label=label, id=i)
        (ds.train if i < n_train else ds.test).append(inst)
    return ds


def load_multichannel_tsv(train_paths, test_paths=None, name: str = "uea") -> Dataset:
    """Multivariate loading: one TSV per channel, rows aligned across files."""
    per_channel = [load_ucr_tsv(tp, test_paths[k] if test_paths else None, name)
                   for k, tp in enumerate(train_paths)]
    base = per_channel[0]
    ds = Dataset(name=name, n_classes=base.n_classes)
    for split in ("train", "test"):
        for i, inst in enumerate(getattr(base, split)):
            channels = [getattr(c, split)[i].values for c in per_channel]
            stacked = np.concatenate(channels, axis=1)
            getattr(ds, split).append(replace(inst, values=stacked))
    return ds


def zscore_normalize(ds: Dataset) -> Dataset:
    """Per-channel z-score with statistics from the train split only.

    A zero-variance channel is centered but not scaled.
    """
    stacked = np.concatenate([inst.values for inst in ds.train], axis=0)
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    safe = np.where(std > 0, std, 1.0)

    def norm(inst):
        return replace(inst, values=(inst.values - mean) / safe)
    return Dataset(name=ds.name,
                   train=[norm(i) for i in ds.train],
                   test=[norm(i) for i in ds.test],
                   n_classes=ds.n_classes,
                   norm_mean=mean, norm_std=std)


def synth_generate(n_per_class: int, t: int, seed: int) -> Dataset:
    """Two-class synthetic set: noisy sinusoids (loops in delay space)
    versus pure Gaussian noise.  50/50 stratified train/test split."""
    if n_per_class < 1 or t < 32:
        raise ValueError("need n_per_class >= 1 and T >= 32")
    rng = np.random.default_rng(seed)
    ds = Dataset(name=f"synth(n={n_per_class},T={t},seed={seed})", n_classes=2)
    next_id = 0
    records = []
    for label in (0, 1):
        for k in range(n_per_class):
            if label == 0:
                f = rng.integers(3, 7)
                phase = rng.uniform(0, 2 * np.pi)
                ts = np.arange(t)
                vals = np.sin(2 * np.pi * f * ts / t + phase)
                vals = vals + rng.normal(0, 0.1, size=t)
            else:
                vals = rng.normal(0, 1.0, size=t)
            records.append((label, k, vals[:, None]))
    for label, k, vals in records:
        inst = TimeSeriesInstance(values=vals, label=label, id=next_id)
        next_id += 1
        (ds.train if k % 2 == 0 else ds.test).append(inst)
    return ds


def subsample_fraction(ds: Dataset, fraction: float, seed: int) -> Dataset:
    """Stratified subsample of the train split, at least 1 kept per class."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    if fraction == 1:
        return ds
    rng = np.random.default_rng(seed)
    kept = []
    labels = sorted({i.label for i in ds.train})
    for label in labels:
        members = [i for i in ds.train if i.label == label]
        k = max(1, int(len(members) * fraction))
        idx = rng.choice(len(members), size=k, replace=False)
        kept.extend(members[i] for i in sorted(idx))
    kept.sort(key=lambda i: i.id)
    return Dataset(name=ds.name, train=kept, test=list(ds.test),
                   n_classes=ds.n_classes,
                   norm_mean=ds.norm_mean, norm_std=ds.norm_std)


# ---------------------------------------------------------------------------
# linear probe
# ---------------------------------------------------------------------------

def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _fit_softmax_gd(x: np.ndarray, y: np.ndarray, n_classes: int,
                    penalty: float, iters: int = 500, lr: float = 0.5) -> np.ndarray:
    n, d = x.shape
    xb = np.hstack([x, np.ones((n, 1))])
    onehot = np.eye(n_classes)[y]
    w = np.zeros((d + 1, n_classes))
    lr = min(lr, 0.4 / (2.0 * penalty))  # keep the decay step contractive
    for _ in range(iters):
        p = _softmax(xb @ w)
        grad = xb.T @ (p - onehot) / n
        grad[:d] += 2.0 * penalty * w[:d]  # bias row unpenalized
        w -= lr * grad
    return w


def _predict(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    xb = np.hstack([x, np.ones((x.shape[0], 1))])
    return np.argmax(xb @ w, axis=1)


def _stratified_split(labels: np.ndarray, frac_val: float, rng) -> tuple:
    train_idx, val_idx = [], []
    for label in np.unique(labels):
        members = np.flatnonzero(labels == label)
        members = rng.permutation(members)
        k = int(len(members) * frac_val)
        val_idx.extend(members[:k])
        train_idx.extend(members[k:])
    return np.array(sorted(train_idx)), np.array(sorted(val_idx))


def linear_probe(train_reps: np.ndarray, train_labels,
                 test_reps: np.ndarray, test_labels,
                 seed: int = 0) -> float:
    """Multinomial logistic regression on frozen representations.

    The L2 penalty is selected from {1e-4 .. 1e2} (decade grid) on a
    stratified validation split, then the probe is refit on the full train
    split.  Returns test accuracy in [0, 1].
    """
    x_tr = np.asarray(train_reps, dtype=np.float64)
    y_tr = np.asarray(train_labels, dtype=np.int64)
    x_te = np.asarray(test_reps, dtype=np.float64)
    y_te = np.asarray(test_labels, dtype=np.int64)
    classes = np.unique(y_tr)
    if len(classes) < 2:
        raise DataError("linear probe needs at least two classes in train")
    remap = {c: i for i, c in enumerate(classes)}
    y_tr = np.array([remap[c] for c in y_tr])
    y_te = np.array([remap.get(c, -1) for c in y_te])
    n_classes = len(classes)

    mean = x_tr.mean(axis=0)
    std = x_tr.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    x_tr = (x_tr - mean) / std
    x_te = (x_te - mean) / std

    rng = np.random.default_rng(seed)
    tr_idx, val_idx = _stratified_split(y_tr, 0.25, rng)
    penalties = [10.0 ** k for k in range(-4, 3)]
    best_pen, best_acc = penalties[0], -1.0
    if len(val_idx) and len(np.unique(y_tr[tr_idx])) == n_classes:
        for pen in penalties:
            w = _fit_softmax_gd(x_tr[tr_idx], y_tr[tr_idx], n_classes, pen)
            acc = float((_predict(w, x_tr[val_idx]) == y_tr[val_idx]).mean())
            if acc > best_acc:
                best_pen, best_acc = pen, acc
    w = _fit_softmax_gd(x_tr, y_tr, n_classes, best_pen)
    return float((_predict(w, x_te) == y_te).mean())
