"""Analytic-vs-numeric gradient verification for a whole network."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .layers import BatchNormLayer, Mode, l1_loss, l1_loss_grad


def _component_error(a: float, b: float) -> float:
    # Smaller of absolute and relative deviation. Exact-zero analytic
    # gradients are legitimate (batchnorm makes whole columns translation
    # invariant), and there the central difference only returns the
    # floating-point noise floor; a pure relative metric would divide
    # that noise by itself.
    d = abs(a - b)
    s = abs(a) + abs(b)
    return d if s == 0.0 else min(d, d / s)


def gradient_check(net, x, target, h: float = 1e-6) -> float:
    """Max relative error between backprop and central finite differences.

    Every parameter element is perturbed by +-h and the L1 loss re-evaluated
    in TRAINING mode, so the network must be deterministic: dropout
    probability 0 everywhere. Batchnorm running statistics are restored
    afterwards (the repeated forwards would otherwise drift them).
    """
    if any(p != 0.0 for p in net.dropout_probabilities()):
        raise ConfigError("gradient_check requires dropout probability 0 everywhere")
    x = np.asarray(x, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)

    snapshots = []
    for stage in net.stages:
        norm = getattr(stage, "norm", None)
        if isinstance(norm, BatchNormLayer):
            snapshots.append((norm, norm.running_mean.copy(), norm.running_var.copy()))

    try:
        pred = net.forward(x, Mode.TRAINING)
        net.backward(l1_loss_grad(pred, target))
        pairs = net.parameters()
        analytic = [g.copy() for _, g in pairs]

        max_err = 0.0
        for (param, _), ana in zip(pairs, analytic):
            flat_p = param.reshape(-1)
            flat_a = ana.reshape(-1)
            for i in range(flat_p.size):
                orig = flat_p[i]
                flat_p[i] = orig + h
                lo_hi = l1_loss(net.forward(x, Mode.TRAINING), target)
                flat_p[i] = orig - h
                lo_lo = l1_loss(net.forward(x, Mode.TRAINING), target)
                flat_p[i] = orig
                numeric = (lo_hi - lo_lo) / (2.0 * h)
                err = _component_error(flat_a[i], numeric)
                if err > max_err:
                    max_err = err
    finally:
        for norm, mean, var in snapshots:
            norm.running_mean = mean
            norm.running_var = var
    return max_err
