"""Dense network building blocks: linear, batchnorm, relu, dropout, L1 loss.

Layers cache activations during TRAINING forward passes and replay them in
``backward``; INFERENCE passes are pure and cache nothing, so a trained
network can score batches concurrently. All math is float64. The actual
arithmetic lives in the kernel backend (compiled or numpy, see
``backend.py``); this module owns shapes, modes and caches.
"""

from __future__ import annotations

import enum

import numpy as np

from ..errors import ConfigError, ShapeError
from .backend import K


class Mode(enum.Enum):
    TRAINING = "training"
    INFERENCE = "inference"


def as_matrix(x, name="input") -> np.ndarray:
    """Coerce to a C-contiguous float64 2-D array."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def glorot_uniform(rng, out_features: int, in_features: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (in_features + out_features))
    return rng.uniform(-limit, limit, size=(out_features, in_features))


class LinearLayer:
    """y = W x + b with W stored (out_features, in_features)."""

    def __init__(self, in_features: int, out_features: int, rng=None):
        if in_features < 1 or out_features < 1:
            raise ConfigError("linear layer needs positive feature counts")
        if rng is None:
            rng = np.random.default_rng(0)
        self.weights = glorot_uniform(rng, out_features, in_features)
        self.bias = np.zeros(out_features)
        self.grad_weights = None
        self.grad_bias = None
        self._x = None

    @classmethod
    def from_arrays(cls, weights, bias) -> "LinearLayer":
        weights = as_matrix(weights, "weights")
        bias = np.ascontiguousarray(bias, dtype=np.float64)
        if bias.ndim != 1 or bias.shape[0] != weights.shape[0]:
            raise ShapeError("bias length must equal the weight row count")
        if not (np.isfinite(weights).all() and np.isfinite(bias).all()):
            raise ShapeError("linear layer parameters must be finite")
        layer = cls.__new__(cls)
        layer.weights = weights
        layer.bias = bias
        layer.grad_weights = None
        layer.grad_bias = None
        layer._x = None
        return layer

    @property
    def in_features(self) -> int:
        return self.weights.shape[1]

    @property
    def out_features(self) -> int:
        return self.weights.shape[0]

    def forward(self, x, mode: Mode, rng=None):
        x = as_matrix(x)
        if x.shape[1] != self.in_features:
            raise ShapeError(
                f"linear layer expects {self.in_features} input features, got {x.shape[1]}"
            )
        if mode is Mode.TRAINING:
            self._x = x
        return K.linear_forward(x, self.weights, self.bias)

    def backward(self, gy):
        if self._x is None:
            raise RuntimeError("linear backward called without a cached forward pass")
        gy = as_matrix(gy, "upstream gradient")
        if gy.shape != (self._x.shape[0], self.out_features):
            raise ShapeError("upstream gradient shape does not match the forward pass")
        gx, self.grad_weights, self.grad_bias = K.linear_backward(self._x, self.weights, gy)
        return gx

    def parameters(self):
        return [(self.weights, self.grad_weights), (self.bias, self.grad_bias)]


class BatchNormLayer:
    """Per-feature batch normalization with running statistics.

    TRAINING normalizes with the biased batch variance and folds the batch
    statistics into the running ones with weight ``momentum``; INFERENCE
    normalizes with the running statistics only.
    """

    def __init__(self, num_features: int, eps: float = 1e-5, momentum: float = 0.1):
        if num_features < 1:
            raise ConfigError("batchnorm needs a positive feature count")
        if eps <= 0:
            raise ConfigError("batchnorm eps must be positive")
        if not 0.0 < momentum < 1.0:
            raise ConfigError("batchnorm momentum must lie in (0, 1)")
        self.gamma = np.ones(num_features)
        self.beta = np.zeros(num_features)
        self.running_mean = np.zeros(num_features)
        self.running_var = np.ones(num_features)
        self.eps = float(eps)
        self.momentum = float(momentum)
        self.grad_gamma = None
        self.grad_beta = None
        self._xhat = None
        self._var = None

    @classmethod
    def from_arrays(cls, gamma, beta, running_mean, running_var, eps, momentum):
        layer = cls(len(gamma), eps=eps, momentum=momentum)
        for name, value in (
            ("gamma", gamma),
            ("beta", beta),
            ("running_mean", running_mean),
            ("running_var", running_var),
        ):
            arr = np.ascontiguousarray(value, dtype=np.float64)
            if arr.shape != (layer.num_features,):
                raise ShapeError(f"batchnorm {name} has inconsistent length")
            setattr(layer, name, arr)
        if np.any(layer.running_var < 0):
            raise ShapeError("batchnorm running variance must be non-negative")
        return layer

    @property
    def num_features(self) -> int:
        return self.gamma.shape[0]

    def forward(self, x, mode: Mode, rng=None):
        x = as_matrix(x)
        if x.shape[1] != self.num_features:
            raise ShapeError(
                f"batchnorm expects {self.num_features} features, got {x.shape[1]}"
            )
        if mode is Mode.INFERENCE:
            return K.bn_forward_infer(
                x, self.gamma, self.beta, self.running_mean, self.running_var, self.eps
            )
        if x.shape[0] < 2:
            raise ShapeError("training-mode batchnorm needs a batch of at least 2")
        y, mean, var, xhat = K.bn_forward_train(x, self.gamma, self.beta, self.eps)
        m = self.momentum
        self.running_mean = (1.0 - m) * self.running_mean + m * mean
        self.running_var = (1.0 - m) * self.running_var + m * var
        self._xhat = xhat
        self._var = var
        return y

    def backward(self, gy):
        if self._xhat is None:
            raise RuntimeError("batchnorm backward called without a cached forward pass")
        gy = as_matrix(gy, "upstream gradient")
        if gy.shape != self._xhat.shape:
            raise ShapeError("upstream gradient shape does not match the forward pass")
        gx, self.grad_gamma, self.grad_beta = K.bn_backward(
            gy, self.gamma, self._xhat, self._var, self.eps
        )
        return gx

    def parameters(self):
        return [(self.gamma, self.grad_gamma), (self.beta, self.grad_beta)]


class DropoutLayer:
    """Inverted dropout: survivors are scaled by 1/(1-p) at train time."""

    def __init__(self, p: float):
        if not 0.0 <= p < 1.0:
            raise ConfigError(f"dropout probability must lie in [0, 1), got {p}")
        self.p = float(p)
        self.mask = None

    def forward(self, x, mode: Mode, rng=None):
        x = as_matrix(x)
        if mode is Mode.INFERENCE:
            self.mask = None
            return x
        if self.p == 0.0:
            self.mask = np.ones(x.shape, dtype=np.uint8)
            return x
        if rng is None:
            raise ConfigError("training-mode dropout with p > 0 needs a seeded rng")
        self.mask = (rng.random(x.shape) >= self.p).astype(np.uint8)
        self._scale = 1.0 / (1.0 - self.p)
        return K.mask_scale(x, self.mask, self._scale)

    def backward(self, gy):
        if self.mask is None:
            raise RuntimeError("dropout backward called without a cached forward pass")
        gy = as_matrix(gy, "upstream gradient")
        if self.p == 0.0:
            return gy
        if gy.shape != self.mask.shape:
            raise ShapeError("upstream gradient shape does not match the forward pass")
        return K.mask_scale(gy, self.mask, self._scale)

    def parameters(self):
        return []


def relu(x):
    """Elementwise max(0, x)."""
    return K.relu_forward(as_matrix(x))


class LinearBlock:
    """Linear -> BatchNorm -> ReLU -> Dropout."""

    def __init__(self, linear: LinearLayer, norm: BatchNormLayer, dropout: DropoutLayer):
        if norm.num_features != linear.out_features:
            raise ConfigError("batchnorm feature count must match the linear output")
        self.linear = linear
        self.norm = norm
        self.dropout = dropout
        self._pre_relu = None

    @classmethod
    def create(cls, in_features, out_features, dropout_p, rng,
               eps=1e-5, momentum=0.1) -> "LinearBlock":
        return cls(
            LinearLayer(in_features, out_features, rng),
            BatchNormLayer(out_features, eps=eps, momentum=momentum),
            DropoutLayer(dropout_p),
        )

    @property
    def in_features(self) -> int:
        return self.linear.in_features

    @property
    def out_features(self) -> int:
        return self.linear.out_features

    def forward(self, x, mode: Mode, rng=None):
        z = self.linear.forward(x, mode)
        h = self.norm.forward(z, mode)
        if mode is Mode.TRAINING:
            self._pre_relu = h
        a = K.relu_forward(h)
        return self.dropout.forward(a, mode, rng)

    def backward(self, gy):
        if self._pre_relu is None:
            raise RuntimeError("block backward called without a cached forward pass")
        g = self.dropout.backward(gy)
        g = K.relu_backward(as_matrix(g, "upstream gradient"), self._pre_relu)
        g = self.norm.backward(g)
        return self.linear.backward(g)

    def parameters(self):
        return self.linear.parameters() + self.norm.parameters()


class Network:
    """A fixed chain of LinearBlocks and bare LinearLayers."""

    def __init__(self, stages):
        if not stages:
            raise ConfigError("network needs at least one stage")
        for prev, nxt in zip(stages, stages[1:]):
            if prev.out_features != nxt.in_features:
                raise ConfigError("adjacent stage widths do not line up")
        self.stages = list(stages)

    @property
    def input_width(self) -> int:
        return self.stages[0].in_features

    @property
    def output_width(self) -> int:
        return self.stages[-1].out_features

    def forward(self, x, mode: Mode, rng=None):
        out = x
        for stage in self.stages:
            out = stage.forward(out, mode, rng)
        return out

    def backward(self, gy):
        g = gy
        for stage in reversed(self.stages):
            g = stage.backward(g)
        return g

    def parameters(self):
        pairs = []
        for stage in self.stages:
            pairs.extend(stage.parameters())
        return pairs

    def dropout_probabilities(self):
        return [s.dropout.p for s in self.stages if isinstance(s, LinearBlock)]


def l1_loss(pred, target) -> float:
    """Mean absolute elementwise difference."""
    pred = as_matrix(pred, "pred")
    target = as_matrix(target, "target")
    if pred.shape != target.shape:
        raise ShapeError(f"shape mismatch: {pred.shape} vs {target.shape}")
    return K.l1_loss(pred, target)


def l1_loss_grad(pred, target):
    """d(l1_loss)/d(pred): sign(pred - target)/size, 0 at exact ties."""
    pred = as_matrix(pred, "pred")
    target = as_matrix(target, "target")
    if pred.shape != target.shape:
        raise ShapeError(f"shape mismatch: {pred.shape} vs {target.shape}")
    return K.l1_grad(pred, target)
