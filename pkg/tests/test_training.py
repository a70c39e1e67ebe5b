"""Run configuration, training loop, and checkpoint behavior."""
import numpy as np
import pytest

from tstopo.data import DataError
from tstopo.training import (ConfigError, RunConfig, build_model,
                             compute_diagrams, diagrams_with_cache,
                             effective_alpha, encode_dataset,
                             load_dataset_spec, load_run_config, point_sets,
                             train_model)

TINY = {"dataset": "synth:n_per_class=3,T=32", "epochs": 2, "batch_size": 4}


def _tiny_run(**extra):
    raw = dict(TINY)
    raw.update(extra)
    cfg = RunConfig.from_dict(raw)
    ds = load_dataset_spec(cfg.dataset, cfg.seed)
    return cfg, ds


# -- config -----------------------------------------------------------------

def test_config_round_trips_through_dict():
    cfg = RunConfig.from_dict({"epochs": 7, "loss": {"alpha": 0.25},
                               "ablation": {"no_h0": True}})
    again = RunConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()
    assert again.config_hash() == cfg.config_hash()


def test_config_hash_differs_between_configs():
    a = RunConfig.from_dict({"epochs": 1})
    b = RunConfig.from_dict({"epochs": 2})
    assert a.config_hash() != b.config_hash()


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"loss": {"alpha": 0.5, "bogus": 1}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"loss": {"tau": 0.0}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"loss": {"alpha": -0.1}})


def test_load_run_config_file_and_overrides(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"epochs": 3, "seed": 5}')
    cfg = load_run_config(p, {"seed": 9})
    assert cfg.epochs == 3 and cfg.seed == 9
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigError):
        load_run_config(bad)


def test_dataset_spec_parsing():
    ds = load_dataset_spec("synth:n_per_class=2,T=32", seed=0)
    assert len(ds.train) == 2 and len(ds.test) == 2
    with pytest.raises(ConfigError):
        load_dataset_spec("synth:bogus=2", seed=0)
    with pytest.raises(ConfigError):
        load_dataset_spec("synth:n_per_class", seed=0)
    with pytest.raises(DataError):
        load_dataset_spec("/nonexistent/prefix", seed=0)


def test_effective_alpha():
    cfg = RunConfig.from_dict({"loss": {"alpha": 0.5}})
    assert effective_alpha(cfg) == 0.5
    cfg = RunConfig.from_dict({"loss": {"alpha": 0.5},
                               "ablation": {"no_cross": True}})
    assert effective_alpha(cfg) == 0.0


# -- diagrams / point sets ----------------------------------------------------------

def test_diagrams_with_cache_roundtrip_and_hits(tmp_path):
    cfg, ds = _tiny_run()
    cache = tmp_path / "d.bin"
    first, hits0 = diagrams_with_cache(ds, cfg.tda, cache)
    assert hits0 == 0
    second, hits1 = diagrams_with_cache(ds, cfg.tda, cache)
    assert hits1 == len(ds.instances)
    for k in first:
        assert [(p.dim, p.birth, p.death) for p in first[k].pairs] == \
            [(p.dim, p.birth, p.death) for p in second[k].pairs]


def test_diagrams_with_cache_recovers_from_corruption(tmp_path):
    cfg, ds = _tiny_run()
    cache = tmp_path / "d.bin"
    diagrams_with_cache(ds, cfg.tda, cache)
    cache.write_bytes(cache.read_bytes()[:-7])
    recovered, hits = diagrams_with_cache(ds, cfg.tda, cache)
    assert hits == 0
    assert set(recovered) == {i.id for i in ds.instances}


def test_point_sets_dimension_filters():
    cfg, ds = _tiny_run()
    diagrams = compute_diagrams(ds, cfg.tda)
    ids = [i.id for i in ds.train]
    rows, mask = point_sets(diagrams, ids, cfg.tda.capacity)
    rows0, mask0 = point_sets(diagrams, ids, cfg.tda.capacity, no_h1=True)
    rows1, mask1 = point_sets(diagrams, ids, cfg.tda.capacity, no_h0=True)
    for k, inst_id in enumerate(ids):
        all_pairs = {(p.dim, p.birth, p.death) for p in diagrams[inst_id].pairs}
        kept0 = {tuple(r) for r in rows0[k][mask0[k]]}
        # each surviving row corresponds to an H0 pair of the full diagram
        assert all((0, a, b) in all_pairs for a, b, _ in kept0)
        kept1 = {tuple(r) for r in rows1[k][mask1[k]]}
        assert all((1, a, b) in all_pairs for a, b, _ in kept1)


# -- training ------------------------------------------------------------------------

def test_epochs_zero_checkpoint_equals_initialization(tmp_path):
    cfg, ds = _tiny_run(epochs=0)
    model, history = train_model(ds, cfg, out_dir=tmp_path)
    assert history == []
    fresh = build_model(cfg, ds.train[0].channels)
    for (na, ta), (nb, tb) in zip(model.named_parameters(),
                                  fresh.named_parameters()):
        assert na == nb
        assert np.array_equal(ta.data, tb.data)
    assert (tmp_path / "checkpoint" / "manifest.json").exists()


def test_training_reduces_loss():
    cfg, ds = _tiny_run(epochs=8)
    _, history = train_model(ds, cfg)
    assert history[-1]["loss"] < history[0]["loss"]
    assert all(np.isfinite(h["loss"]) for h in history)


def test_training_is_deterministic():
    cfg, ds = _tiny_run(epochs=2)
    m1, h1 = train_model(ds, cfg)
    m2, h2 = train_model(ds, cfg)
    assert h1 == h2
    for (_, a), (_, b) in zip(m1.named_parameters(), m2.named_parameters()):
        assert np.array_equal(a.data, b.data)


def test_no_cross_freezes_topo_parameters():
    cfg, ds = _tiny_run(epochs=2, ablation={"no_cross": True})
    model, _ = train_model(ds, cfg)
    fresh = build_model(cfg, ds.train[0].channels)
    frozen = dict(fresh.named_parameters())
    for name, tensor in model.named_parameters():
        if name.startswith(("topo.", "head_topo.")):
            assert np.array_equal(tensor.data, frozen[name].data), name
        elif name.startswith("temporal."):
            assert not np.array_equal(tensor.data, frozen[name].data), name


def test_no_time_loss_trains_on_cross_only():
    cfg, ds = _tiny_run(epochs=1, ablation={"no_time_loss": True})
    _, history = train_model(ds, cfg)
    assert history[0]["time_loss"] == 0.0
    assert history[0]["cross_loss"] > 0.0


def test_no_time_loss_with_no_cross_rejected():
    cfg, ds = _tiny_run(ablation={"no_time_loss": True, "no_cross": True})
    with pytest.raises(ConfigError):
        train_model(ds, cfg)


def test_empty_train_split_rejected():
    cfg, ds = _tiny_run()
    ds.train.clear()
    with pytest.raises(DataError):
        train_model(ds, cfg)


def test_encode_dataset_shape_and_chunking():
    cfg, ds = _tiny_run(epochs=0)
    model, _ = train_model(ds, cfg)
    reps = encode_dataset(model, ds.instances, chunk=2)
    assert reps.shape == (len(ds.instances), cfg.temporal.out_dim)
    again = encode_dataset(model, ds.instances, chunk=64)
    assert np.array_equal(reps, again)
