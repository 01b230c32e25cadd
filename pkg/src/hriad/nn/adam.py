"""Bias-corrected Adam optimizer over lists of parameter arrays."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, ShapeError
from .backend import K


class AdamState:
    """Moment buffers plus hyperparameters for one parameter list.

    Moments are allocated lazily on the first step so the state can be
    created before the network exists.
    """

    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        if not (0.0 < beta1 < 1.0 and 0.0 < beta2 < 1.0):
            raise ConfigError("Adam betas must lie in (0, 1)")
        if eps <= 0:
            raise ConfigError("Adam eps must be positive")
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step = 0
        self.first_moment = None
        self.second_moment = None


def adam_step(params, grads, state: AdamState) -> AdamState:
    """Apply one Adam update in place to every array in `params`."""
    if len(params) != len(grads):
        raise ShapeError("params and grads must pair up one to one")
    if state.first_moment is None:
        state.first_moment = [np.zeros_like(p) for p in params]
        state.second_moment = [np.zeros_like(p) for p in params]
    if len(state.first_moment) != len(params):
        raise ShapeError("optimizer state was built for a different parameter list")
    state.step += 1
    corr1 = 1.0 - state.beta1 ** state.step
    corr2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if g is None:
            raise ShapeError("missing gradient; run backward before adam_step")
        g = np.ascontiguousarray(g, dtype=np.float64)
        if g.shape != p.shape or m.shape != p.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        K.adam_update(
            p.reshape(-1), g.reshape(-1), m.reshape(-1), v.reshape(-1),
            state.learning_rate, state.beta1, state.beta2, state.eps, corr1, corr2,
        )
    return state
