"""Network (de)serialization to a plain-JSON-compatible dict.

Floats go through json's shortest-repr encoding, which round-trips float64
bit-exactly, so save -> load -> save is byte identical.
"""

from __future__ import annotations

from ..errors import DataValidationError
from .layers import BatchNormLayer, DropoutLayer, LinearBlock, LinearLayer, Network


def network_to_dict(net: Network) -> dict:
    stages = []
    for stage in net.stages:
        if isinstance(stage, LinearBlock):
            stages.append(
                {
                    "type": "block",
                    "linear": {
                        "weights": stage.linear.weights.tolist(),
                        "bias": stage.linear.bias.tolist(),
                    },
                    "batchnorm": {
                        "gamma": stage.norm.gamma.tolist(),
                        "beta": stage.norm.beta.tolist(),
                        "running_mean": stage.norm.running_mean.tolist(),
                        "running_var": stage.norm.running_var.tolist(),
                        "eps": stage.norm.eps,
                        "momentum": stage.norm.momentum,
                    },
                    "dropout_p": stage.dropout.p,
                }
            )
        elif isinstance(stage, LinearLayer):
            stages.append(
                {
                    "type": "linear",
                    "weights": stage.weights.tolist(),
                    "bias": stage.bias.tolist(),
                }
            )
        else:
            raise DataValidationError(f"cannot serialize stage of type {type(stage)!r}")
    return {"stages": stages}


def network_from_dict(data: dict) -> Network:
    stages = []
    for entry in data["stages"]:
        kind = entry.get("type")
        if kind == "block":
            bn = entry["batchnorm"]
            stages.append(
                LinearBlock(
                    LinearLayer.from_arrays(entry["linear"]["weights"], entry["linear"]["bias"]),
                    BatchNormLayer.from_arrays(
                        bn["gamma"], bn["beta"], bn["running_mean"], bn["running_var"],
                        eps=bn["eps"], momentum=bn["momentum"],
                    ),
                    DropoutLayer(entry["dropout_p"]),
                )
            )
        elif kind == "linear":
            stages.append(LinearLayer.from_arrays(entry["weights"], entry["bias"]))
        else:
            raise DataValidationError(f"unknown checkpoint stage type: {kind!r}")
    return Network(stages)
