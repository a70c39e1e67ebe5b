"""Dataset loading, normalization, synthetic generation, and probe tests."""
import numpy as np
import pytest

from tstopo.data import (DataError, Dataset, TimeSeriesInstance, linear_probe,
                         load_multichannel_tsv, load_ucr_tsv, subsample_fraction,
                         synth_generate, zscore_normalize)
from tstopo.tda import diagram_for_instance

RNG = np.random.default_rng(1)


# -- loading -----------------------------------------------------------------

def _write(tmp_path, name, lines):
    p = tmp_path / name
    p.write_text("\n".join(lines) + "\n")
    return p


def test_load_basic_tsv(tmp_path):
    p = _write(tmp_path, "a.tsv", ["1\t0.5\t0.7", "2\t1.0\t2.0"])
    ds = load_ucr_tsv(p)
    assert ds.n_classes == 2
    assert ds.train[0].label == 0          # smallest raw label -> 0
    assert np.array_equal(ds.train[0].values, [[0.5], [0.7]])


def test_load_comma_separated_and_negative_labels(tmp_path):
    p = _write(tmp_path, "b.csv", ["-1,3,4", "1,5,6"])
    ds = load_ucr_tsv(p)
    assert [i.label for i in ds.train] == [0, 1]  # {-1, 1} -> {0, 1}


def test_load_interpolates_nan(tmp_path):
    p = _write(tmp_path, "c.tsv", ["0\t1.0\tNaN\t3.0\t?", "1\t9\t9\t9\t9"])
    ds = load_ucr_tsv(p)
    assert np.array_equal(ds.train[0].values.reshape(-1), [1.0, 2.0, 3.0, 3.0])


def test_load_errors_carry_locations(tmp_path):
    p = _write(tmp_path, "d.tsv", ["0\t1.0", "1\tbogus"])
    with pytest.raises(DataError, match="row 2, column 2"):
        load_ucr_tsv(p)
    p = _write(tmp_path, "e.tsv", ["oops\t1.0"])
    with pytest.raises(DataError, match="row 1, column 1"):
        load_ucr_tsv(p)
    p = tmp_path / "empty.tsv"
    p.write_text("")
    with pytest.raises(DataError, match="empty"):
        load_ucr_tsv(p)


def test_load_all_nan_row_rejected(tmp_path):
    p = _write(tmp_path, "f.tsv", ["0\tNaN\tNaN"])
    with pytest.raises(DataError, match="no valid values"):
        load_ucr_tsv(p)


def test_load_train_test_split(tmp_path):
    tr = _write(tmp_path, "x_TRAIN.tsv", ["0\t1\t2", "1\t3\t4"])
    te = _write(tmp_path, "x_TEST.tsv", ["1\t5\t6"])
    ds = load_ucr_tsv(tr, te)
    assert len(ds.train) == 2 and len(ds.test) == 1
    ids = [i.id for i in ds.train + ds.test]
    assert len(set(ids)) == 3              # train/test disjoint ids


def test_multichannel_loader(tmp_path):
    c1 = _write(tmp_path, "c1.tsv", ["0\t1\t2", "1\t3\t4"])
    c2 = _write(tmp_path, "c2.tsv", ["0\t5\t6", "1\t7\t8"])
    ds = load_multichannel_tsv([c1, c2])
    assert ds.train[0].values.shape == (2, 2)
    assert np.array_equal(ds.train[0].values, [[1, 5], [2, 6]])


# -- normalization --------------------------------------------------------------

def _tiny_dataset():
    tr = [TimeSeriesInstance(np.array([[1.0], [3.0]]), 0, 0),
          TimeSeriesInstance(np.array([[5.0], [7.0]]), 1, 1)]
    te = [TimeSeriesInstance(np.array([[100.0], [0.0]]), 0, 2)]
    return Dataset(name="t", train=tr, test=te, n_classes=2)


def test_zscore_train_stats_only():
    ds = zscore_normalize(_tiny_dataset())
    stacked = np.concatenate([i.values for i in ds.train])
    assert abs(stacked.mean()) < 1e-12
    assert abs(stacked.std() - 1.0) < 1e-12
    test_stacked = np.concatenate([i.values for i in ds.test])
    assert abs(test_stacked.mean()) > 1.0  # test split not refit


def test_zscore_constant_channel_centered_not_scaled():
    tr = [TimeSeriesInstance(np.full((3, 1), 4.0), 0, 0)]
    ds = zscore_normalize(Dataset(name="c", train=tr, test=[], n_classes=1))
    assert np.array_equal(ds.train[0].values, np.zeros((3, 1)))


# -- synthetic data --------------------------------------------------------------

def test_synth_determinism_and_shape():
    a = synth_generate(4, 64, seed=3)
    b = synth_generate(4, 64, seed=3)
    for ia, ib in zip(a.instances, b.instances):
        assert np.array_equal(ia.values, ib.values)
        assert ia.label == ib.label
    assert len(a.train) == len(a.test) == 4
    assert sorted(i.label for i in a.train) == [0, 0, 1, 1]


def test_synth_classes_separate_topologically():
    ds = synth_generate(6, 128, seed=0)

    def max_h1(inst):
        dgm = diagram_for_instance(inst.values, m=2, gamma=8)
        pers = [p.persistence for p in dgm.pairs if p.dim == 1]
        return max(pers, default=0.0)

    sines = [max_h1(i) for i in ds.instances if i.label == 0]
    noise = [max_h1(i) for i in ds.instances if i.label == 1]
    assert min(sines) > 0.3                       # every sine forms a loop
    assert max(noise) < float(np.median(sines))


def test_synth_validates_args():
    with pytest.raises(ValueError):
        synth_generate(0, 64, 0)
    with pytest.raises(ValueError):
        synth_generate(4, 16, 0)


# -- subsampling -----------------------------------------------------------------

def test_subsample_fraction_rules():
    ds = synth_generate(20, 64, seed=1)
    # the train split holds 10 per class; floor(10 * 0.25) = 2 kept per class
    sub = subsample_fraction(ds, 0.25, seed=2)
    labels = [i.label for i in sub.train]
    assert labels.count(0) == 2 and labels.count(1) == 2
    assert len(sub.test) == len(ds.test)
    tiny = subsample_fraction(ds, 0.001, seed=2)
    assert sorted(i.label for i in tiny.train) == [0, 1]  # >= 1 per class
    assert subsample_fraction(ds, 1.0, seed=2) is ds
    with pytest.raises(ValueError):
        subsample_fraction(ds, 0.0, seed=2)


def test_subsample_deterministic():
    ds = synth_generate(10, 64, seed=1)
    a = subsample_fraction(ds, 0.3, seed=7)
    b = subsample_fraction(ds, 0.3, seed=7)
    assert [i.id for i in a.train] == [i.id for i in b.train]


# -- linear probe -----------------------------------------------------------------

def test_probe_separable_reaches_one():
    rng = np.random.default_rng(0)
    x0 = rng.normal(size=(30, 8)) + 4.0
    x1 = rng.normal(size=(30, 8)) - 4.0
    xtr = np.vstack([x0[:15], x1[:15]])
    xte = np.vstack([x0[15:], x1[15:]])
    y = [0] * 15 + [1] * 15
    assert linear_probe(xtr, y, xte, y, seed=0) == 1.0


def test_probe_random_labels_near_chance():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(200, 6))
    y = rng.integers(0, 2, size=200)
    acc = linear_probe(x[:120], y[:120], x[120:], y[120:], seed=0)
    assert 0.3 <= acc <= 0.7


def test_probe_identical_reps_majority_rate():
    x = np.ones((12, 4))
    ytr = [0] * 8 + [1] * 4
    yte = [0, 0, 1]
    acc = linear_probe(x, ytr, x[:3], yte, seed=0)
    assert acc == pytest.approx(2.0 / 3.0)


def test_probe_single_class_rejected():
    x = np.ones((4, 2))
    with pytest.raises(DataError):
        linear_probe(x, [1, 1, 1, 1], x, [1, 1, 1, 1])
