"""Layer primitives and optimizer tests."""
import numpy as np
import pytest

from tstopo.autograd import Tensor, grad_check
from tstopo.nn import (Adam, ShapeMismatchError, causal_dilated_conv1d,
                       init_param, linear, masked_max_over_set,
                       masked_mean_over_set, max_over_time)

RNG = np.random.default_rng(7)


# -- linear -----------------------------------------------------------------

def test_linear_identity():
    x = Tensor([[1.0, 2.0]])
    out = linear(x, Tensor(np.eye(2)), Tensor(np.zeros(2)))
    assert np.array_equal(out.data, [[1.0, 2.0]])


def test_linear_affine_example():
    out = linear(Tensor([[1.0, 1.0]]), Tensor([[1.0], [1.0]]), Tensor([-2.0]))
    assert np.array_equal(out.data, [[0.0]])


def test_linear_bias_gradient_all_ones():
    w = Tensor(RNG.normal(size=(3, 2)))
    b = Tensor(np.zeros(2), requires_grad=True)
    linear(Tensor(RNG.normal(size=(4, 3))), w, b).sum().backward()
    assert np.array_equal(b.grad, [4.0, 4.0])


def test_linear_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        linear(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))


# -- causal dilated conv ------------------------------------------------------

def test_conv_k1_identity_kernel():
    x = Tensor(RNG.normal(size=(5, 2)))
    kernel = Tensor(np.eye(2)[None, :, :])
    out = causal_dilated_conv1d(x, kernel, dilation=1)
    assert np.allclose(out.data, x.data)


def test_conv_left_zero_padding_example():
    x = Tensor(np.ones((4, 1)))
    kernel = Tensor(np.ones((2, 1, 1)))  # sums current and previous input
    out = causal_dilated_conv1d(x, kernel, dilation=1)
    assert np.array_equal(out.data.reshape(-1), [1.0, 2.0, 2.0, 2.0])


def test_conv_causality_perturbation():
    x = RNG.normal(size=(6, 2))
    kernel = Tensor(RNG.normal(size=(3, 2, 4)))
    base = causal_dilated_conv1d(Tensor(x), kernel, dilation=2).data
    x2 = x.copy()
    x2[3] += 10.0
    pert = causal_dilated_conv1d(Tensor(x2), kernel, dilation=2).data
    assert np.array_equal(base[:3], pert[:3])  # output before t=3 unchanged
    assert np.array_equal(base[0], pert[0])


def test_conv_grad_check():
    kernel = Tensor(RNG.normal(size=(3, 2, 2)))

    def f(x):
        return causal_dilated_conv1d(x, kernel, dilation=2).sum()
    assert grad_check(f, RNG.normal(size=(5, 2))) < 1e-6


def test_conv_rejects_bad_kernel():
    with pytest.raises(ShapeMismatchError):
        causal_dilated_conv1d(Tensor(np.ones((4, 2))), Tensor(np.ones((3, 2))))
    with pytest.raises(ShapeMismatchError):
        causal_dilated_conv1d(Tensor(np.ones((4, 2))),
                              Tensor(np.ones((3, 5, 2))))


# -- set pooling ---------------------------------------------------------------

def test_masked_max_examples():
    x = Tensor(np.array([[1.0, 5.0], [3.0, 2.0]]))
    assert np.array_equal(masked_max_over_set(x, [True, True]).data, [3.0, 5.0])
    x = Tensor(np.array([[1.0, 5.0], [9.0, 9.0]]))
    assert np.array_equal(masked_max_over_set(x, [True, False]).data, [1.0, 5.0])
    assert np.array_equal(masked_max_over_set(x, [False, False]).data, [0.0, 0.0])


def test_masked_max_permutation_invariance():
    x = RNG.normal(size=(8, 4))
    mask = RNG.random(8) < 0.6
    base = masked_max_over_set(Tensor(x), mask).data
    for _ in range(10):
        perm = RNG.permutation(8)
        out = masked_max_over_set(Tensor(x[perm]), mask[perm]).data
        assert np.array_equal(base, out)


def test_masked_max_grad_goes_to_argmax_row():
    x = Tensor(np.array([[1.0, 5.0], [3.0, 2.0]]), requires_grad=True)
    masked_max_over_set(x, [True, True]).sum().backward()
    assert np.array_equal(x.grad, [[0.0, 1.0], [1.0, 0.0]])


def test_masked_max_grad_check_batched():
    mask = np.array([[True, True, False], [True, False, False]])

    def f(x):
        return masked_max_over_set(x, mask).sum()
    assert grad_check(f, RNG.normal(size=(2, 3, 4))) < 1e-6


def test_masked_mean_matches_numpy():
    x = RNG.normal(size=(5, 3))
    mask = np.array([True, False, True, True, False])
    out = masked_mean_over_set(Tensor(x), mask).data
    assert np.allclose(out, x[mask].mean(axis=0))
    zero = masked_mean_over_set(Tensor(x), np.zeros(5, bool)).data
    assert np.array_equal(zero, np.zeros(3))


def test_max_over_time_examples():
    assert np.array_equal(max_over_time(Tensor([[1.0], [3.0], [2.0]])).data, [3.0])
    assert np.array_equal(max_over_time(Tensor([[4.0, -1.0]])).data, [4.0, -1.0])


# -- init / Adam --------------------------------------------------------------

def test_init_param_bounds_and_determinism():
    a = init_param((100, 4), 4, np.random.default_rng(3))
    b = init_param((100, 4), 4, np.random.default_rng(3))
    assert np.array_equal(a.data, b.data)
    assert np.abs(a.data).max() <= 0.5  # sqrt(1/4)
    assert a.requires_grad


def test_adam_zero_gradient_leaves_params():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    opt = Adam([p], lr=0.1)
    p.grad = np.zeros(2)
    opt.step()
    assert np.array_equal(p.data, [1.0, -2.0])


def test_adam_first_step_approx_lr():
    # bias-corrected first step with g=1 moves the parameter by ~lr
    p = Tensor(np.array([0.0]), requires_grad=True)
    opt = Adam([p], lr=0.1)
    p.grad = np.ones(1)
    opt.step()
    assert opt.step_count == 1
    assert abs(p.data[0] + 0.1) < 1e-6


def test_adam_identical_gradients_identical_updates():
    p1 = Tensor(np.array([1.0]), requires_grad=True)
    p2 = Tensor(np.array([1.0]), requires_grad=True)
    opt = Adam([p1, p2], lr=0.05)
    for _ in range(3):
        p1.grad = np.array([0.3])
        p2.grad = np.array([0.3])
        opt.step()
    assert np.array_equal(p1.data, p2.data)


def test_adam_optimizes_quadratic():
    p = Tensor(np.array([5.0]), requires_grad=True)
    opt = Adam([p], lr=0.2)
    for _ in range(200):
        opt.zero_grad()
        loss = (p * p).sum()
        loss.backward()
        opt.step()
    assert abs(p.data[0]) < 0.1
