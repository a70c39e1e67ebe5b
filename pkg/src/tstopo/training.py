"""Run configuration, model assembly, and the joint training loop."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import multiprocessing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import augment, tda
from .autograd import Tensor
from .cache import (CacheError, read_diagram_cache, save_checkpoint,
                    write_diagram_cache)
from .data import Dataset, DataError, load_ucr_tsv, synth_generate, zscore_normalize
from .encoders import (ProjectionConfig, ProjectionHead, TemporalEncoder,
                       TemporalEncoderConfig, TopoEncoder, TopoEncoderConfig,
                       project_time, project_topo)
from .losses import BatchViews, LossConfig, cross_modal_loss, hierarchical_time_loss


class ConfigError(ValueError):
    pass


class NumericError(RuntimeError):
    pass


@dataclass
class TdaConfig:
    m: int = 2
    gamma: int = 0        # 0 = auto: floor(T / 16), clamped to >= 1
    max_eps: float = 0.0  # 0 = auto: enclosing radius of the cloud
    capacity: int = 64    # M, point-set capacity


@dataclass
class AugmentConfig:
    robustness: str = "none"
    sigma: float = 0.1
    segments: int = 5


@dataclass
class AblationFlags:
    no_cross: bool = False
    no_h0: bool = False
    no_h1: bool = False
    avgpool_topo: bool = False
    no_time_loss: bool = False


@dataclass
class RunConfig:
    dataset: str = "synth:n_per_class=100,T=128"
    seed: int = 42
    epochs: int = 50
    batch_size: int = 8
    lr: float = 1e-3
    temporal: TemporalEncoderConfig = field(default_factory=TemporalEncoderConfig)
    topo: TopoEncoderConfig = field(default_factory=TopoEncoderConfig)
    proj: ProjectionConfig = field(default_factory=ProjectionConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    tda: TdaConfig = field(default_factory=TdaConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    ablation: AblationFlags = field(default_factory=AblationFlags)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        cfg = cls()
        nested = {"temporal": TemporalEncoderConfig, "topo": TopoEncoderConfig,
                  "proj": ProjectionConfig, "loss": LossConfig, "tda": TdaConfig,
                  "augment": AugmentConfig, "ablation": AblationFlags}
        for key, value in raw.items():
            if key in nested:
                sub_cls = nested[key]
                known = {f.name for f in dataclasses.fields(sub_cls)}
                bad = set(value) - known
                if bad:
                    raise ConfigError(f"unknown key(s) {sorted(bad)} in '{key}'")
                base = dataclasses.asdict(getattr(cfg, key))
                base.update(value)
                setattr(cfg, key, sub_cls(**base))
            elif hasattr(cfg, key):
                setattr(cfg, key, value)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        if cfg.loss.tau <= 0:
            raise ConfigError("loss.tau must be > 0")
        if cfg.loss.alpha < 0:
            raise ConfigError("loss.alpha must be >= 0")
        return cfg

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


def load_run_config(path_or_none, overrides: dict | None = None) -> RunConfig:
    raw = {}
    if path_or_none:
        try:
            raw = json.loads(Path(path_or_none).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if overrides:
        raw.update(overrides)
    return RunConfig.from_dict(raw)


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

def load_dataset_spec(spec: str, seed: int) -> Dataset:
    """`synth:n_per_class=..,T=..` or a path prefix with _TRAIN/_TEST.tsv."""
    if spec.startswith("synth:"):
        params = {"n_per_class": 100, "T": 128}
        body = spec[len("synth:"):]
        for part in [p for p in body.split(",") if p]:
            if "=" not in part:
                raise ConfigError(f"bad synth parameter {part!r}")
            key, value = part.split("=", 1)
            if key not in params:
                raise ConfigError(f"unknown synth parameter {key!r}")
            params[key] = int(value)
        ds = synth_generate(params["n_per_class"], params["T"], seed)
    else:
        train_path = Path(f"{spec}_TRAIN.tsv")
        test_path = Path(f"{spec}_TEST.tsv")
        if not train_path.exists():
            raise DataError(f"missing dataset file {train_path}")
        ds = load_ucr_tsv(train_path, test_path if test_path.exists() else None,
                          name=Path(spec).name)
    return zscore_normalize(ds)


# ---------------------------------------------------------------------------
# diagrams and point sets
# ---------------------------------------------------------------------------

def _diagram_args(inst, cfg: TdaConfig):
    gamma = cfg.gamma if cfg.gamma > 0 else None
    max_eps = cfg.max_eps if cfg.max_eps > 0 else None
    return inst.values, cfg.m, gamma, max_eps


def _compute_one(args):
    values, m, gamma, max_eps = args
    return tda.diagram_for_instance(values, m=m, gamma=gamma, max_eps=max_eps)


def compute_diagrams(ds: Dataset, cfg: TdaConfig, workers: int = 1) -> dict:
    instances = ds.instances
    jobs = [_diagram_args(inst, cfg) for inst in instances]
    if workers > 1:
        with multiprocessing.Pool(workers) as pool:
            results = pool.map(_compute_one, jobs)
    else:
        results = [_compute_one(j) for j in jobs]
    return {inst.id: dgm for inst, dgm in zip(instances, results)}


def diagrams_with_cache(ds: Dataset, cfg: TdaConfig, cache_path=None,
                        workers: int = 1) -> tuple:
    """Returns ({id: diagram}, cache_hits)."""
    expected = {inst.id for inst in ds.instances}
    if cache_path and Path(cache_path).exists():
        try:
            cached = read_diagram_cache(cache_path)
            if set(cached) == expected:
                return cached, len(cached)
        except CacheError:
            pass  # fall through and recompute
    diagrams = compute_diagrams(ds, cfg, workers=workers)
    if cache_path:
        write_diagram_cache(cache_path, diagrams)
    return diagrams, 0


def point_sets(diagrams: dict, ids: list, capacity: int,
               no_h0: bool = False, no_h1: bool = False) -> tuple:
    """Stack TopoPointSets for `ids` into (rows [N, M, 3], mask [N, M])."""
    dims = tuple(d for d, drop in ((0, no_h0), (1, no_h1)) if not drop)
    rows = np.zeros((len(ids), capacity, 3))
    mask = np.zeros((len(ids), capacity), dtype=bool)
    for k, inst_id in enumerate(ids):
        ps = tda.diagram_to_point_set(diagrams[inst_id].filtered(dims), capacity)
        rows[k] = ps.rows
        mask[k] = ps.mask
    return rows, mask


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

class Model:
    def __init__(self, cfg: RunConfig, in_channels: int,
                 rng: np.random.Generator):
        temporal_cfg = dataclasses.replace(cfg.temporal, in_channels=in_channels)
        topo_cfg = dataclasses.replace(
            cfg.topo, pool="mean" if cfg.ablation.avgpool_topo else cfg.topo.pool)
        self.temporal = TemporalEncoder(temporal_cfg, rng)
        self.topo = TopoEncoder(topo_cfg, rng)
        self.head_time = ProjectionHead(temporal_cfg.out_dim, cfg.proj.dim, rng)
        self.head_topo = ProjectionHead(topo_cfg.out_dim, cfg.proj.dim, rng)

    def named_parameters(self) -> list:
        named = []
        named += [("temporal.w_in", self.temporal.w_in),
                  ("temporal.b_in", self.temporal.b_in)]
        named += [(f"temporal.conv{l}", k) for l, k in enumerate(self.temporal.kernels)]
        named += [("temporal.w_out", self.temporal.w_out),
                  ("temporal.b_out", self.temporal.b_out)]
        for prefix, obj in (("topo", self.topo),
                            ("head_time", self.head_time),
                            ("head_topo", self.head_topo)):
            for attr in ("w1", "b1", "w2", "b2", "w3", "b3"):
                if hasattr(obj, attr):
                    named.append((f"{prefix}.{attr}", getattr(obj, attr)))
        return named

    def parameters(self) -> list:
        return [t for _, t in self.named_parameters()]

    def load_state(self, state: dict):
        for name, tensor in self.named_parameters():
            if name not in state:
                raise ConfigError(f"checkpoint missing parameter {name!r}")
            if state[name].shape != tensor.data.shape:
                raise ConfigError(f"checkpoint shape mismatch for {name!r}")
            tensor.data = state[name].copy()


def build_model(cfg: RunConfig, in_channels: int) -> Model:
    init_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(4)[0])
    return Model(cfg, in_channels, init_rng)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def _rng_streams(seed: int):
    children = np.random.SeedSequence(seed).spawn(4)
    return tuple(np.random.default_rng(c) for c in children)


def effective_alpha(cfg: RunConfig) -> float:
    return 0.0 if cfg.ablation.no_cross else cfg.loss.alpha


def train_model(ds: Dataset, cfg: RunConfig, diagrams: dict | None = None,
                out_dir=None) -> tuple:
    """Joint contrastive training.  Returns (model, history).

    history: list of per-epoch dicts {epoch, loss, time_loss, cross_loss}.
    """
    alpha = effective_alpha(cfg)
    if cfg.ablation.no_time_loss and alpha == 0:
        raise ConfigError("no_time_loss together with a zero cross-modal "
                          "weight leaves nothing to optimize")
    train = ds.train
    if not train:
        raise DataError("empty train split")
    t_len = train[0].t
    in_channels = train[0].channels

    if alpha > 0 and diagrams is None:
        diagrams = compute_diagrams(
            Dataset(name=ds.name, train=train, test=[]), cfg.tda)
    topo_rows = topo_mask = None
    if alpha > 0:
        ids = [inst.id for inst in train]
        rows, mask = point_sets(diagrams, ids, cfg.tda.capacity,
                                cfg.ablation.no_h0, cfg.ablation.no_h1)
        topo_rows = {i: rows[k] for k, i in enumerate(ids)}
        topo_mask = {i: mask[k] for k, i in enumerate(ids)}

    init_rng, crop_rng, mask_rng, shuffle_rng = _rng_streams(cfg.seed)
    model = Model(cfg, in_channels, init_rng)
    from .nn import Adam
    opt = Adam(model.parameters(), lr=cfg.lr)

    aug_cfg = cfg.augment
    history = []
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(train))
        epoch_tot, epoch_time, epoch_cross, n_batches = 0.0, 0.0, 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            batch = [train[i] for i in order[start:start + cfg.batch_size]]
            crop = augment.random_crop_pair(t_len, crop_rng)
            views_a, views_b = [], []
            for inst in batch:
                xa = augment.apply_transform(aug_cfg.robustness, inst.values,
                                             crop_rng, aug_cfg.sigma,
                                             aug_cfg.segments)
                xb = augment.apply_transform(aug_cfg.robustness, inst.values,
                                             crop_rng, aug_cfg.sigma,
                                             aug_cfg.segments)
                va, vb = crop.slice_views(xa)[0], crop.slice_views(xb)[1]
                views_a.append(va)
                views_b.append(vb)
            xa = Tensor(np.stack(views_a))
            xb = Tensor(np.stack(views_b))
            ra_full = model.temporal(xa, train=True, mask_rng=mask_rng)
            rb_full = model.temporal(xb, train=True, mask_rng=mask_rng)
            (oa0, oa1), (ob0, ob1) = crop.overlap_in_views()
            r = ra_full[:, oa0:oa1, :]
            r_prime = rb_full[:, ob0:ob1, :]

            time_part = None
            if not cfg.ablation.no_time_loss:
                time_part = hierarchical_time_loss(r, r_prime)
            cross_part = None
            if alpha > 0:
                rows = np.stack([topo_rows[i.id] for i in batch])
                mask = np.stack([topo_mask[i.id] for i in batch])
                h = model.topo(Tensor(rows), mask)
                y = project_topo(model.head_topo, h)
                z = project_time(model.head_time, r)
                z_prime = project_time(model.head_time, r_prime)
                cross_part = cross_modal_loss(z, z_prime, y, cfg.loss.tau)

            if time_part is None:
                total = alpha * cross_part
            elif cross_part is None:
                total = time_part
            else:
                total = time_part + alpha * cross_part
            value = total.item()
            if not np.isfinite(value):
                raise NumericError(f"non-finite loss at epoch {epoch}")
            opt.zero_grad()
            total.backward()
            opt.step()
            epoch_tot += value
            epoch_time += time_part.item() if time_part is not None else 0.0
            epoch_cross += cross_part.item() if cross_part is not None else 0.0
            n_batches += 1
        history.append({"epoch": epoch,
                        "loss": epoch_tot / n_batches,
                        "time_loss": epoch_time / n_batches,
                        "cross_loss": epoch_cross / n_batches})

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "loss_curve.jsonl", "w") as fh:
            for rec in history:
                fh.write(json.dumps(rec) + "\n")
        save_checkpoint(out_dir / "checkpoint", model.named_parameters(),
                        cfg.to_dict(), cfg.seed)
    return model, history


def encode_dataset(model: Model, instances: list, chunk: int = 32) -> np.ndarray:
    """Instance-level representations: full-series forward (no masking),
    then max over time.  Returns [N, F]."""
    reps = []
    for start in range(0, len(instances), chunk):
        block = instances[start:start + chunk]
        x = Tensor(np.stack([inst.values for inst in block]))
        r = model.temporal(x, train=False)
        reps.append(r.max(axis=-2).data)
    return np.concatenate(reps, axis=0)
