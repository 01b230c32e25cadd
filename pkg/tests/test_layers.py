import numpy as np
import pytest

from hriad.errors import ConfigError, ShapeError
from hriad.nn.layers import (
    BatchNormLayer,
    DropoutLayer,
    LinearBlock,
    LinearLayer,
    Mode,
    Network,
    l1_loss,
    l1_loss_grad,
    relu,
)


def manual_linear(x, w, b):
    # independent dot-product oracle
    out = np.zeros((len(x), len(w)))
    for i, row in enumerate(x):
        for j, wrow in enumerate(w):
            out[i, j] = sum(a * c for a, c in zip(row, wrow)) + b[j]
    return out


class TestLinear:
    def test_identity_weights(self):
        layer = LinearLayer.from_arrays(np.eye(2), [0.0, 0.0])
        y = layer.forward(np.array([[1.0, 2.0]]), Mode.INFERENCE)
        assert np.array_equal(y, [[1.0, 2.0]])

    def test_against_dot_product_oracle(self):
        w = [[1.0, 1.0], [0.0, 1.0]]
        b = [1.0, 0.0]
        layer = LinearLayer.from_arrays(w, b)
        x = np.array([[1.0, 2.0]])
        assert np.array_equal(layer.forward(x, Mode.INFERENCE), manual_linear(x, w, b))
        assert np.array_equal(layer.forward(x, Mode.INFERENCE), [[4.0, 2.0]])

    def test_random_against_oracle(self, rng):
        w = rng.normal(size=(4, 6))
        b = rng.normal(size=4)
        layer = LinearLayer.from_arrays(w, b)
        x = rng.normal(size=(5, 6))
        assert np.allclose(layer.forward(x, Mode.INFERENCE), manual_linear(x, w, b), atol=1e-12)

    def test_width_mismatch_is_shape_error(self):
        layer = LinearLayer.from_arrays(np.eye(2), [0.0, 0.0])
        with pytest.raises(ShapeError):
            layer.forward(np.zeros((1, 3)), Mode.INFERENCE)

    def test_backward_requires_cached_forward(self):
        layer = LinearLayer(2, 2)
        with pytest.raises(RuntimeError):
            layer.backward(np.zeros((1, 2)))

    def test_glorot_init_is_bounded_and_seeded(self):
        a = LinearLayer(10, 20, np.random.default_rng(5))
        b = LinearLayer(10, 20, np.random.default_rng(5))
        assert np.array_equal(a.weights, b.weights)
        limit = np.sqrt(6.0 / 30.0)
        assert np.abs(a.weights).max() <= limit
        assert np.array_equal(a.bias, np.zeros(20))


class TestBatchNorm:
    def test_identical_rows_give_beta(self):
        layer = BatchNormLayer(3)
        layer.beta = np.array([1.0, -2.0, 0.5])
        x = np.tile([4.0, 5.0, 6.0], (4, 1))
        y = layer.forward(x, Mode.TRAINING)
        assert np.allclose(y, np.tile(layer.beta, (4, 1)), atol=1e-12)

    def test_two_point_batch_oracle(self):
        # mean 1, biased var 1 computed by hand
        layer = BatchNormLayer(1)
        y = layer.forward(np.array([[0.0], [2.0]]), Mode.TRAINING)
        expected = (np.array([[0.0], [2.0]]) - 1.0) / np.sqrt(1.0 + layer.eps)
        assert np.allclose(y, expected, atol=1e-15)
        assert np.allclose(y, [[-1.0], [1.0]], atol=1e-5)

    def test_inference_identity_statistics(self):
        layer = BatchNormLayer(2)
        x = np.array([[0.3, -1.2], [2.0, 0.7]])
        y = layer.forward(x, Mode.INFERENCE)
        assert np.allclose(y, x, atol=1e-4)

    def test_training_batch_of_one_rejected(self):
        layer = BatchNormLayer(2)
        with pytest.raises(ShapeError):
            layer.forward(np.zeros((1, 2)), Mode.TRAINING)

    def test_normalization_moments(self, rng):
        layer = BatchNormLayer(6)
        x = rng.normal(size=(32, 6)) * 3.0 + 1.5
        y = layer.forward(x, Mode.TRAINING)
        assert np.abs(y.mean(axis=0)).max() < 1e-9
        var = x.var(axis=0)
        bound = (layer.eps / (var + layer.eps)).max() + 1e-12
        assert np.abs(y.var(axis=0) - 1.0).max() <= bound

    def test_running_stats_update(self, rng):
        layer = BatchNormLayer(3)
        x = rng.normal(size=(8, 3)) + 2.0
        layer.forward(x, Mode.TRAINING)
        assert np.allclose(layer.running_mean, 0.1 * x.mean(axis=0), atol=1e-12)
        assert np.allclose(layer.running_var, 0.9 * 1.0 + 0.1 * x.var(axis=0), atol=1e-12)


class TestRelu:
    def test_mixed_signs(self):
        assert np.array_equal(relu(np.array([[-1.0, 0.0, 2.0]])), [[0.0, 0.0, 2.0]])

    def test_identity_on_nonnegative(self, rng):
        x = np.abs(rng.normal(size=(3, 4)))
        assert np.array_equal(relu(x), x)

    def test_all_negative_gives_zeros(self):
        assert np.array_equal(relu(np.full((2, 2), -3.0)), np.zeros((2, 2)))


class TestDropout:
    def test_p_zero_is_identity_with_ones_mask(self, rng):
        layer = DropoutLayer(0.0)
        x = rng.normal(size=(4, 5))
        y = layer.forward(x, Mode.TRAINING, rng)
        assert np.array_equal(y, x)
        assert np.array_equal(layer.mask, np.ones_like(x, dtype=np.uint8))

    def test_inference_is_identity(self, rng):
        layer = DropoutLayer(0.7)
        x = rng.normal(size=(4, 5))
        assert np.array_equal(layer.forward(x, Mode.INFERENCE), x)

    def test_drop_fraction_statistical_oracle(self):
        layer = DropoutLayer(0.5)
        x = np.ones((100, 1000))
        y = layer.forward(x, Mode.TRAINING, np.random.default_rng(123))
        dropped = np.mean(y == 0.0)
        assert abs(dropped - 0.5) < 0.01
        survivors = y[y != 0.0]
        assert np.allclose(survivors, 2.0)  # inverted dropout scaling

    def test_same_seed_same_mask(self):
        layer_a, layer_b = DropoutLayer(0.4), DropoutLayer(0.4)
        x = np.ones((10, 10))
        ya = layer_a.forward(x, Mode.TRAINING, np.random.default_rng(9))
        yb = layer_b.forward(x, Mode.TRAINING, np.random.default_rng(9))
        assert np.array_equal(ya, yb)
        assert np.array_equal(layer_a.mask, layer_b.mask)

    def test_backward_zeros_masked_positions(self, rng):
        layer = DropoutLayer(0.5)
        x = np.ones((20, 20))
        layer.forward(x, Mode.TRAINING, rng)
        g = layer.backward(np.ones_like(x))
        assert np.array_equal(g == 0.0, layer.mask == 0)

    def test_probability_one_rejected(self):
        with pytest.raises(ConfigError):
            DropoutLayer(1.0)


class TestL1Loss:
    def test_equal_inputs_zero(self, rng):
        x = rng.normal(size=(3, 4))
        assert l1_loss(x, x) == 0.0

    def test_hand_oracle(self):
        # (|1-2| + |3-2|) / 2 computed by hand
        assert l1_loss(np.array([[1.0, 3.0]]), np.array([[2.0, 2.0]])) == 1.0

    def test_absolute_homogeneity(self, rng):
        a = rng.normal(size=(4, 4))
        b = rng.normal(size=(4, 4))
        for c in (-3.0, 0.5):
            assert np.isclose(l1_loss(c * a, c * b), abs(c) * l1_loss(a, b), atol=1e-12)

    def test_nonnegative_and_zero_iff_equal(self, rng):
        for _ in range(20):
            a = rng.normal(size=(3, 5))
            b = rng.normal(size=(3, 5))
            value = l1_loss(a, b)
            assert value >= 0.0
            assert (value == 0.0) == np.array_equal(a, b)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            l1_loss(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_grad_sign_and_tie_convention(self):
        pred = np.array([[2.0, 1.0, 5.0]])
        target = np.array([[1.0, 1.0, 7.0]])
        g = l1_loss_grad(pred, target)
        assert np.array_equal(g, [[1.0 / 3.0, 0.0, -1.0 / 3.0]])


class TestBlockAndNetwork:
    def test_relu_gradient_blocks_negative_preactivation(self):
        # one unit forced negative pre-relu: its path must carry no gradient
        lin = LinearLayer.from_arrays([[1.0], [-1.0]], [0.0, 0.0])
        block = LinearBlock(lin, BatchNormLayer(2), DropoutLayer(0.0))
        # bypass batchnorm's centering so the sign of the preactivation is known
        block.norm.forward = lambda x, mode, rng=None: x
        block.norm.backward = lambda g: g
        x = np.array([[1.0], [2.0]])
        y = block.forward(x, Mode.TRAINING)
        assert np.array_equal(y[:, 1], [0.0, 0.0])
        gx = block.backward(np.ones_like(y))
        assert np.array_equal(gx, [[1.0], [1.0]])  # only the positive unit contributes
        assert np.array_equal(lin.grad_weights[1], [0.0])

    def test_network_width_mismatch_rejected(self, rng):
        with pytest.raises(ConfigError):
            Network([LinearLayer(4, 3, rng), LinearLayer(2, 1, rng)])

    def test_inference_forward_is_bit_deterministic(self, rng):
        net = Network([LinearBlock.create(6, 4, 0.3, rng), LinearLayer(4, 6, rng)])
        x = rng.normal(size=(5, 6))
        a = net.forward(x, Mode.INFERENCE)
        b = net.forward(x, Mode.INFERENCE)
        assert np.array_equal(a, b)

    def test_block_backward_without_forward_errors(self, rng):
        block = LinearBlock.create(3, 2, 0.0, rng)
        with pytest.raises(RuntimeError):
            block.backward(np.zeros((2, 2)))
