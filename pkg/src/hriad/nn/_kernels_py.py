"""Numpy implementation of the dense-network kernels.

This is the pure-Python fallback for the compiled extension in
``_kernels.pyx``; both modules export the same functions over C-contiguous
float64 arrays. Shape validation happens one level up, in the layer
classes, so the kernels themselves stay branch-free.
"""

import numpy as np

BACKEND = "numpy"


def linear_forward(x, w, b):
    # y[i] = w @ x[i] + b, with w stored (out, in)
    return x @ w.T + b


def linear_backward(x, w, gy):
    gx = gy @ w
    gw = gy.T @ x
    gb = gy.sum(axis=0)
    return gx, gw, gb


def bn_forward_train(x, gamma, beta, eps):
    mean = x.mean(axis=0)
    centered = x - mean
    var = np.mean(centered * centered, axis=0)
    xhat = centered / np.sqrt(var + eps)
    y = gamma * xhat + beta
    return y, mean, var, xhat


def bn_forward_infer(x, gamma, beta, running_mean, running_var, eps):
    xhat = (x - running_mean) / np.sqrt(running_var + eps)
    return gamma * xhat + beta


def bn_backward(gy, gamma, xhat, var, eps):
    n = gy.shape[0]
    inv_std = 1.0 / np.sqrt(var + eps)
    dxhat = gy * gamma
    s1 = dxhat.sum(axis=0)
    s2 = (dxhat * xhat).sum(axis=0)
    gx = (inv_std / n) * (n * dxhat - s1 - xhat * s2)
    ggamma = (gy * xhat).sum(axis=0)
    gbeta = gy.sum(axis=0)
    return gx, ggamma, gbeta


def relu_forward(x):
    return np.maximum(x, 0.0)


def relu_backward(gy, x):
    return np.where(x > 0.0, gy, 0.0)


def mask_scale(a, mask, scale):
    # Shared by dropout forward and backward: zero masked entries, scale the rest.
    return a * (mask * scale)


def l1_loss(pred, target):
    return float(np.mean(np.abs(pred - target)))


def l1_grad(pred, target):
    # Subgradient at exact ties is 0 (np.sign(0) == 0).
    return np.sign(pred - target) / pred.size


def adam_update(p, g, m, v, lr, beta1, beta2, eps, corr1, corr2):
    """One bias-corrected Adam step, in place on flat float64 arrays.

    corr1/corr2 are the bias-correction factors 1 - beta^t for the current
    step, computed by the caller.
    """
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    p -= lr * (m / corr1) / (np.sqrt(v / corr2) + eps)
