"""Finite-difference verification of the backward pass."""

import numpy as np
import pytest

from hriad.errors import ConfigError
from hriad.nn import gradient_check
from hriad.nn.layers import LinearBlock, LinearLayer, Network


def safe_target(rng, pred_shape):
    # keep |pred - target| well away from the L1 kink at 0
    return rng.uniform(0.5, 1.5, size=pred_shape) * rng.choice([-1.0, 1.0], size=pred_shape) + 3.0


def test_single_linear_layer_l1():
    rng = np.random.default_rng(2)
    net = Network([LinearLayer(5, 3, rng)])
    x = rng.normal(size=(4, 5))
    assert gradient_check(net, x, safe_target(rng, (4, 3)), h=1e-5) < 1e-6


def test_linear_only_chain():
    rng = np.random.default_rng(3)
    net = Network([LinearLayer(6, 4, rng), LinearLayer(4, 2, rng)])
    x = rng.normal(size=(4, 6))
    assert gradient_check(net, x, safe_target(rng, (4, 2)), h=1e-6) < 1e-7


def test_three_block_network():
    rng = np.random.default_rng(4)
    net = Network(
        [
            LinearBlock.create(8, 6, 0.0, rng),
            LinearBlock.create(6, 4, 0.0, rng),
            LinearBlock.create(4, 3, 0.0, rng),
        ]
    )
    x = rng.normal(size=(4, 8))
    assert gradient_check(net, x, safe_target(rng, (4, 3)), h=1e-5) < 1e-5


def test_batchnorm_network_looser_bound():
    rng = np.random.default_rng(5)
    net = Network([LinearBlock.create(7, 5, 0.0, rng), LinearLayer(5, 7, rng)])
    x = rng.normal(size=(6, 7))
    assert gradient_check(net, x, safe_target(rng, (6, 7)), h=1e-5) < 1e-4


def test_running_stats_restored():
    rng = np.random.default_rng(6)
    net = Network([LinearBlock.create(4, 3, 0.0, rng)])
    block = net.stages[0]
    before_mean = block.norm.running_mean.copy()
    before_var = block.norm.running_var.copy()
    x = rng.normal(size=(4, 4))
    gradient_check(net, x, safe_target(rng, (4, 3)), h=1e-6)
    assert np.array_equal(block.norm.running_mean, before_mean)
    assert np.array_equal(block.norm.running_var, before_var)


def test_requires_zero_dropout():
    rng = np.random.default_rng(7)
    net = Network([LinearBlock.create(4, 3, 0.2, rng)])
    with pytest.raises(ConfigError):
        gradient_check(net, rng.normal(size=(4, 4)), rng.normal(size=(4, 3)))
