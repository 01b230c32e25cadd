"""Minimal dense-network kernel with a compiled core and numpy fallback."""

from .adam import AdamState, adam_step
from .backend import COMPILED, backend_name
from .checkpoint import network_from_dict, network_to_dict
from .gradcheck import gradient_check
from .layers import (
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

__all__ = [
    "AdamState",
    "adam_step",
    "COMPILED",
    "backend_name",
    "network_from_dict",
    "network_to_dict",
    "gradient_check",
    "BatchNormLayer",
    "DropoutLayer",
    "LinearBlock",
    "LinearLayer",
    "Mode",
    "Network",
    "l1_loss",
    "l1_loss_grad",
    "relu",
]
