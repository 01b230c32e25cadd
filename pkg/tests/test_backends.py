"""Kernel-level tests run against every available backend, plus parity.

The numpy module is always present; the compiled module is exercised when
the extension built. Oracles here are naive Python loops, independent of
both implementations.
"""

import numpy as np
import pytest

from hriad.nn import _kernels_py

BACKENDS = [_kernels_py]
try:
    from hriad.nn import _kernels

    BACKENDS.append(_kernels)
except ImportError:  # pure-python install
    _kernels = None

parametrize_backend = pytest.mark.parametrize(
    "K", BACKENDS, ids=[m.BACKEND for m in BACKENDS]
)


def naive_matmul_nt(x, w):
    out = np.zeros((x.shape[0], w.shape[0]))
    for i in range(x.shape[0]):
        for j in range(w.shape[0]):
            out[i, j] = float(np.dot(x[i], w[j]))
    return out


@parametrize_backend
def test_linear_forward_oracle(K, rng):
    x = rng.normal(size=(5, 7))
    w = rng.normal(size=(4, 7))
    b = rng.normal(size=4)
    assert np.allclose(K.linear_forward(x, w, b), naive_matmul_nt(x, w) + b, atol=1e-12)


@parametrize_backend
def test_linear_backward_oracle(K, rng):
    x = rng.normal(size=(5, 7))
    w = rng.normal(size=(4, 7))
    gy = rng.normal(size=(5, 4))
    gx, gw, gb = K.linear_backward(x, w, gy)
    assert np.allclose(gx, naive_matmul_nt(gy, w.T), atol=1e-12)
    assert np.allclose(gw, naive_matmul_nt(gy.T, x.T), atol=1e-12)
    assert np.allclose(gb, gy.sum(axis=0), atol=1e-12)


@parametrize_backend
def test_bn_train_forward_oracle(K, rng):
    x = rng.normal(size=(6, 3)) * 2 + 1
    gamma = rng.uniform(0.5, 1.5, 3)
    beta = rng.normal(size=3)
    eps = 1e-5
    y, mean, var, xhat = K.bn_forward_train(x, gamma, beta, eps)
    assert np.allclose(mean, x.mean(axis=0), atol=1e-13)
    assert np.allclose(var, x.var(axis=0), atol=1e-13)
    expected = gamma * (x - x.mean(axis=0)) / np.sqrt(x.var(axis=0) + eps) + beta
    assert np.allclose(y, expected, atol=1e-12)
    assert np.allclose(xhat, (x - mean) / np.sqrt(var + eps), atol=1e-12)


@parametrize_backend
def test_bn_infer_forward_oracle(K, rng):
    x = rng.normal(size=(4, 3))
    gamma = rng.uniform(0.5, 1.5, 3)
    beta = rng.normal(size=3)
    rm = rng.normal(size=3)
    rv = rng.uniform(0.5, 2.0, 3)
    eps = 1e-5
    y = K.bn_forward_infer(x, gamma, beta, rm, rv, eps)
    assert np.allclose(y, gamma * (x - rm) / np.sqrt(rv + eps) + beta, atol=1e-12)


@parametrize_backend
def test_bn_backward_finite_difference(K, rng):
    # central differences through the training-mode forward pass
    x = rng.normal(size=(5, 3))
    gamma = rng.uniform(0.5, 1.5, 3)
    beta = rng.normal(size=3)
    gy = rng.normal(size=(5, 3))
    eps = 1e-5
    _, _, var, xhat = K.bn_forward_train(x, gamma, beta, eps)
    gx, ggamma, gbeta = K.bn_backward(gy, gamma, xhat, var, eps)

    def loss(xx):
        y, *_ = K.bn_forward_train(xx, gamma, beta, eps)
        return float((y * gy).sum())

    h = 1e-6
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            xp, xm = x.copy(), x.copy()
            xp[i, j] += h
            xm[i, j] -= h
            assert abs(gx[i, j] - (loss(xp) - loss(xm)) / (2 * h)) < 1e-7
    assert np.allclose(gbeta, gy.sum(axis=0), atol=1e-12)
    assert np.allclose(ggamma, (gy * xhat).sum(axis=0), atol=1e-12)


@parametrize_backend
def test_relu_and_mask_kernels(K, rng):
    x = rng.normal(size=(4, 5))
    assert np.array_equal(K.relu_forward(x), np.maximum(x, 0.0))
    gy = rng.normal(size=(4, 5))
    assert np.array_equal(K.relu_backward(gy, x), np.where(x > 0, gy, 0.0))
    mask = (rng.random((4, 5)) > 0.5).astype(np.uint8)
    assert np.allclose(K.mask_scale(x, mask, 2.0), x * mask * 2.0, atol=1e-15)


@parametrize_backend
def test_l1_kernels(K, rng):
    pred = rng.normal(size=(3, 4))
    target = rng.normal(size=(3, 4))
    manual = float(np.mean(np.abs(pred - target)))
    assert abs(K.l1_loss(pred, target) - manual) < 1e-14
    g = K.l1_grad(pred, target)
    assert np.array_equal(g, np.sign(pred - target) / pred.size)


@parametrize_backend
def test_adam_kernel_oracle(K, rng):
    p = rng.normal(size=6)
    g = rng.normal(size=6)
    m = np.zeros(6)
    v = np.zeros(6)
    p0 = p.copy()
    lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
    K.adam_update(p, g, m, v, lr, b1, b2, eps, 1 - b1, 1 - b2)
    m_ref = (1 - b1) * g
    v_ref = (1 - b2) * g * g
    step_ref = lr * (m_ref / (1 - b1)) / (np.sqrt(v_ref / (1 - b2)) + eps)
    assert np.allclose(p, p0 - step_ref, atol=1e-15)


@pytest.mark.skipif(_kernels is None, reason="compiled extension not built")
def test_backend_parity(rng):
    for _ in range(20):
        m = int(rng.integers(1, 9))
        k = int(rng.integers(1, 9))
        n = int(rng.integers(1, 9))
        x = rng.normal(size=(m, k))
        w = rng.normal(size=(n, k))
        b = rng.normal(size=n)
        gy = rng.normal(size=(m, n))
        assert np.allclose(
            _kernels.linear_forward(x, w, b),
            _kernels_py.linear_forward(x, w, b),
            atol=1e-12,
        )
        for a, bb in zip(
            _kernels.linear_backward(x, w, gy), _kernels_py.linear_backward(x, w, gy)
        ):
            assert np.allclose(a, bb, atol=1e-12)
        if m >= 2:
            gamma = rng.uniform(0.5, 1.5, k)
            beta = rng.normal(size=k)
            ra = _kernels.bn_forward_train(x, gamma, beta, 1e-5)
            rb = _kernels_py.bn_forward_train(x, gamma, beta, 1e-5)
            for a, bb in zip(ra, rb):
                assert np.allclose(a, bb, atol=1e-12)
            ga = _kernels.bn_backward(x, gamma, ra[3], ra[2], 1e-5)
            gb = _kernels_py.bn_backward(x, gamma, rb[3], rb[2], 1e-5)
            for a, bb in zip(ga, gb):
                assert np.allclose(a, bb, atol=1e-12)
        assert abs(_kernels.l1_loss(x, x + gy @ w) - _kernels_py.l1_loss(x, x + gy @ w)) < 1e-13
