import math

import numpy as np
import pytest

from wavecore.trainer import (Conv2d, GroupNorm, Linear, Pool2d, ReLU, TinyNet, finite_difference_check,
                              random_batch, random_tiny_net, relative_delta, train_step_full,
                              train_step_serialized)


def _two_layer(seed=0):
    return TinyNet.build([Conv2d("c", 3, 4), ReLU("r"), Linear("fc", 4 * 8 * 8, 5)], seed)


def test_zero_weights_give_uniform_loss():
    net = _two_layer()
    for k in net.params:
        net.params[k][...] = 0
    x, y = random_batch(0, batch=4)
    assert train_step_full(net, x, y).loss == pytest.approx(math.log(5), abs=1e-12)


def test_relu_gradient_is_a_mask():
    r = ReLU()
    x = np.array([-2.0, -0.0, 0.0, 1e-300, 3.0])
    _, mask = r.forward({}, x)
    dx, _ = r.backward({}, mask, np.ones_like(x))
    assert set(np.unique(dx)) <= {0.0, 1.0}
    assert dx.tolist() == [0, 0, 0, 1, 1]


def test_finite_difference_two_layer():
    net = _two_layer(1)
    x, y = random_batch(1, batch=3)
    assert max(finite_difference_check(net, x, y, max_entries=10).values()) < 1e-6


@pytest.mark.parametrize("mode", ["max", "avg"])
def test_pool_gradients(mode):
    net = TinyNet.build([Conv2d("c", 3, 2), Pool2d("p", 2, mode), Linear("fc", 2 * 4 * 4, 5)], 2)
    x, y = random_batch(2, batch=2)
    assert max(finite_difference_check(net, x, y).values()) < 1e-6


def test_pool_rejects_ragged_input():
    with pytest.raises(ValueError):
        Pool2d("p", 3).forward({}, np.zeros((1, 1, 8, 8)))


def test_full_sub_batch_is_the_same_computation():
    net = random_tiny_net(3)
    x, y = random_batch(3)
    a, b = train_step_full(net, x, y), train_step_serialized(net, x, y, 8)
    assert a.loss == b.loss
    assert all(np.array_equal(a.grads[k], b.grads[k]) for k in a.grads)


def test_single_sample_sub_batches():
    net = random_tiny_net(4)
    x, y = random_batch(4)
    full, serial = train_step_full(net, x, y), train_step_serialized(net, x, y, 1)
    assert max(relative_delta(full.grads, serial.grads).values()) <= 1e-10
    assert serial.loss == pytest.approx(full.loss, rel=1e-12)


@pytest.mark.parametrize("groups", [1, 2, 4])
def test_group_norm_equivalence(groups):
    net = random_tiny_net(5, groups=groups)
    x, y = random_batch(5)
    worst = max(relative_delta(train_step_full(net, x, y).grads,
                               train_step_serialized(net, x, y, 3).grads).values())
    assert worst <= 1e-9


def test_batch_norm_breaks_equivalence():
    net = random_tiny_net(6, norm="bn")
    x, y = random_batch(6)
    worst = max(relative_delta(train_step_full(net, x, y).grads,
                               train_step_serialized(net, x, y, 2).grads).values())
    assert worst > 1e-3


def test_group_norm_channel_check():
    with pytest.raises(ValueError):
        GroupNorm("g", 6, 4)


def test_sub_batch_bounds():
    net = _two_layer()
    x, y = random_batch(0, batch=4)
    for bad in (0, 5):
        with pytest.raises(ValueError):
            train_step_serialized(net, x, y, bad)


def test_non_finite_input_raises():
    net = _two_layer()
    x, y = random_batch(0, batch=2)
    x[0, 0, 0, 0] = np.nan
    with pytest.raises(FloatingPointError):
        train_step_full(net, x, y)
