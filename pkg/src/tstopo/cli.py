"""Command-line harness.

Subcommands: ph-dump, train, encode, probe, robustness, limited, ablate.
Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .cache import (CacheError, CheckpointError, dump_diagrams_json,
                    load_checkpoint, write_metrics)
from .data import DataError, linear_probe, subsample_fraction
from .losses import ZeroNormError
from .training import (ConfigError, NumericError, RunConfig, build_model,
                       diagrams_with_cache, effective_alpha, encode_dataset,
                       load_dataset_spec, load_run_config, train_model)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tstopo",
                                     description="Topology-aligned contrastive "
                                                 "time series representations")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("ph-dump", "train", "encode", "probe", "robustness",
                 "limited", "ablate"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--ph-cache", help="diagram cache file")
        if name == "ph-dump":
            p.add_argument("--workers", type=int, default=1)
            p.add_argument("--json-dump", action="store_true",
                           help="also write a JSON dump of the diagrams")
        if name == "encode":
            p.add_argument("--checkpoint", required=True)
        if name == "probe":
            p.add_argument("--checkpoint", help="reuse a trained checkpoint "
                                                "instead of training")
        if name == "limited":
            p.add_argument("--fractions", type=float, nargs="+",
                           default=[round(0.01 * k, 2) for k in range(1, 10)] + [1.0])
            p.add_argument("--n-seeds", type=int, default=5)
        if name == "robustness":
            p.add_argument("--n-seeds", type=int, default=1)
    return parser


def _setup(args) -> tuple:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = load_run_config(args.config, overrides)
    out = Path(args.out) if args.out else Path("runs") / (
        f"{args.command}-{cfg.config_hash()[:8]}-s{cfg.seed}")
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def _record(task, cfg: RunConfig, metric: str, value: float, seed=None) -> dict:
    h = cfg.config_hash()
    s = cfg.seed if seed is None else seed
    return {"run_id": f"{task}-{h[:8]}-s{s}", "task": task, "config_hash": h,
            "seed": s, "metric": metric, "value": value}


def _load_with_diagrams(cfg: RunConfig, cache_path):
    ds = load_dataset_spec(cfg.dataset, cfg.seed)
    diagrams, hits = diagrams_with_cache(ds, cfg.tda, cache_path)
    return ds, diagrams, hits


def _train_and_probe(ds, cfg: RunConfig, diagrams, out_dir=None) -> float:
    model, _ = train_model(ds, cfg, diagrams=diagrams, out_dir=out_dir)
    train_reps = encode_dataset(model, ds.train)
    test_reps = encode_dataset(model, ds.test)
    return linear_probe(train_reps, [i.label for i in ds.train],
                        test_reps, [i.label for i in ds.test], seed=cfg.seed)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_ph_dump(args) -> int:
    cfg, out = _setup(args)
    cache = args.ph_cache or out / "diagrams.bin"
    ds = load_dataset_spec(cfg.dataset, cfg.seed)
    diagrams, hits = diagrams_with_cache(ds, cfg.tda, cache,
                                         workers=args.workers)
    if args.json_dump:
        dump_diagrams_json(out / "diagrams.json", diagrams)
    n_pairs = sum(len(d.pairs) for d in diagrams.values())
    print(f"ph-dump: {len(diagrams)} instances, {n_pairs} pairs, "
          f"cache hits {hits}, cache {cache}")
    return 0


def cmd_train(args) -> int:
    cfg, out = _setup(args)
    cache = args.ph_cache or out / "diagrams.bin"
    need_topo = effective_alpha(cfg) > 0
    ds = load_dataset_spec(cfg.dataset, cfg.seed)
    diagrams = None
    if need_topo:
        diagrams, _ = diagrams_with_cache(ds, cfg.tda, cache)
    _, history = train_model(ds, cfg, diagrams=diagrams, out_dir=out)
    final = history[-1]["loss"] if history else float("nan")
    write_metrics(out, [_record("train", cfg, "final_loss", final)])
    print(f"train: {cfg.epochs} epochs, final loss {final:.6f}, out {out}")
    return 0


def _model_from_checkpoint(path, cli_cfg: RunConfig | None):
    state, manifest = load_checkpoint(path)
    ckpt_cfg = RunConfig.from_dict(manifest["config"])
    if cli_cfg is not None and cli_cfg.config_hash() != ckpt_cfg.config_hash():
        raise ConfigError("checkpoint was trained with a different config")
    ds = load_dataset_spec(ckpt_cfg.dataset, ckpt_cfg.seed)
    model = build_model(ckpt_cfg, ds.train[0].channels)
    model.load_state(state)
    return model, ckpt_cfg, ds


def cmd_encode(args) -> int:
    cli_cfg = load_run_config(args.config) if args.config else None
    model, cfg, ds = _model_from_checkpoint(args.checkpoint, cli_cfg)
    out = Path(args.out) if args.out else Path(args.checkpoint).parent
    out.mkdir(parents=True, exist_ok=True)
    reps = encode_dataset(model, ds.instances)
    np.savetxt(out / "reps.csv", reps, delimiter=",")
    print(f"encode: wrote {reps.shape[0]}x{reps.shape[1]} matrix to {out/'reps.csv'}")
    return 0


def cmd_probe(args) -> int:
    cfg, out = _setup(args)
    cache = args.ph_cache or out / "diagrams.bin"
    if args.checkpoint:
        model, cfg, ds = _model_from_checkpoint(args.checkpoint, None)
        train_reps = encode_dataset(model, ds.train)
        test_reps = encode_dataset(model, ds.test)
        acc = linear_probe(train_reps, [i.label for i in ds.train],
                           test_reps, [i.label for i in ds.test], seed=cfg.seed)
    else:
        ds, diagrams, _ = _load_with_diagrams(cfg, cache)
        acc = _train_and_probe(ds, cfg, diagrams, out_dir=out)
    write_metrics(out, [_record("probe", cfg, "accuracy", acc)])
    print(f"probe: linear probe accuracy {acc:.4f}")
    return 0


def cmd_robustness(args) -> int:
    from .augment import TRANSFORM_NAMES
    cfg, out = _setup(args)
    cache = args.ph_cache or out / "diagrams.bin"
    ds, diagrams, _ = _load_with_diagrams(cfg, cache)
    records = []
    for transform in TRANSFORM_NAMES:
        for k in range(args.n_seeds):
            variant = RunConfig.from_dict(cfg.to_dict())
            variant.augment = dataclasses.replace(cfg.augment,
                                                  robustness=transform)
            variant.seed = cfg.seed + k
            acc = _train_and_probe(ds, variant, diagrams)
            records.append(_record("robustness", variant,
                                   f"accuracy_{transform}", acc))
            print(f"robustness[{transform}] seed {variant.seed}: {acc:.4f}")
    write_metrics(out, records)
    return 0


def cmd_limited(args) -> int:
    cfg, out = _setup(args)
    cache = args.ph_cache or out / "diagrams.bin"
    ds, diagrams, _ = _load_with_diagrams(cfg, cache)
    records = []
    for fraction in args.fractions:
        for no_cross in (False, True):
            for k in range(args.n_seeds):
                variant = RunConfig.from_dict(cfg.to_dict())
                variant.seed = cfg.seed + k
                variant.ablation = dataclasses.replace(cfg.ablation,
                                                       no_cross=no_cross)
                sub = subsample_fraction(ds, fraction, variant.seed)
                acc = _train_and_probe(sub, variant, diagrams)
                tag = "no_cross" if no_cross else "full"
                records.append(_record("limited", variant,
                                       f"accuracy_frac{fraction}_{tag}", acc))
                print(f"limited[{fraction}|{tag}] seed {variant.seed}: {acc:.4f}")
    write_metrics(out, records)
    return 0


def cmd_ablate(args) -> int:
    cfg, out = _setup(args)
    cache = args.ph_cache or out / "diagrams.bin"
    ds, diagrams, _ = _load_with_diagrams(cfg, cache)
    variants = [("full", {}),
                ("no_cross", {"no_cross": True}),
                ("no_time_loss", {"no_time_loss": True}),
                ("no_h0", {"no_h0": True}),
                ("no_h1", {"no_h1": True}),
                ("avgpool_topo", {"avgpool_topo": True})]
    records = []
    for tag, flags in variants:
        variant = RunConfig.from_dict(cfg.to_dict())
        variant.ablation = dataclasses.replace(cfg.ablation, **flags)
        acc = _train_and_probe(ds, variant, diagrams)
        records.append(_record("ablate", variant, f"accuracy_{tag}", acc))
        print(f"ablate[{tag}]: {acc:.4f}")
    write_metrics(out, records)
    return 0


COMMANDS = {"ph-dump": cmd_ph_dump, "train": cmd_train, "encode": cmd_encode,
            "probe": cmd_probe, "robustness": cmd_robustness,
            "limited": cmd_limited, "ablate": cmd_ablate}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, CheckpointError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, CacheError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (NumericError, ZeroNormError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
