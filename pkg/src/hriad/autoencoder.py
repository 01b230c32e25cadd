"""Reconstruction autoencoder over fused clip vectors.

The encoder compresses the input through strictly decreasing widths and the
decoder mirrors it back. Every stage is Linear -> BatchNorm -> ReLU ->
Dropout except the final decoder stage, which is Linear only: standardized
targets are signed and unbounded, so an output activation would bias the
reconstruction.

Two presets realize the depth split between single- and multi-modality
inputs: "vision_only" is shallow ([384, 96]), "multimodal" is deeper
([512, 256, 64]).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataValidationError, ShapeError
from .fusion import Standardizer
from .ioutil import atomic_write_text
from .nn import (
    AdamState,
    LinearBlock,
    LinearLayer,
    Mode,
    Network,
    adam_step,
    l1_loss,
    l1_loss_grad,
    network_from_dict,
    network_to_dict,
)

VISION_ONLY_WIDTHS = (384, 96)
MULTIMODAL_WIDTHS = (512, 256, 64)
PRESETS = ("vision_only", "multimodal", "custom")

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class AEConfig:
    input_width: int
    encoder_widths: tuple
    dropout_p: float = 0.1
    preset: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "encoder_widths", tuple(int(w) for w in self.encoder_widths))
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}")
        if not self.encoder_widths:
            raise ConfigError("encoder needs at least one width")
        if self.encoder_widths[-1] < 1:
            raise ConfigError("latent width must be at least 1")
        chain = (self.input_width,) + self.encoder_widths
        if any(b >= a for a, b in zip(chain, chain[1:])):
            raise ConfigError(
                f"encoder widths must be strictly decreasing from the input: {chain}"
            )
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError("dropout probability must lie in [0, 1)")

    @classmethod
    def vision_only(cls, input_width: int = 768, dropout_p: float = 0.1) -> "AEConfig":
        return cls(input_width, VISION_ONLY_WIDTHS, dropout_p, preset="vision_only")

    @classmethod
    def multimodal(cls, input_width: int, dropout_p: float = 0.1) -> "AEConfig":
        return cls(input_width, MULTIMODAL_WIDTHS, dropout_p, preset="multimodal")

    @classmethod
    def for_preset(cls, preset: str, input_width: int, dropout_p: float = 0.1,
                   widths=None) -> "AEConfig":
        if preset == "vision_only":
            return cls.vision_only(input_width, dropout_p)
        if preset == "multimodal":
            return cls.multimodal(input_width, dropout_p)
        if preset == "custom":
            if not widths:
                raise ConfigError("custom preset needs explicit encoder widths")
            return cls(input_width, tuple(widths), dropout_p, preset="custom")
        raise ConfigError(f"unknown preset {preset!r}")

    def to_dict(self) -> dict:
        return {
            "input_width": self.input_width,
            "encoder_widths": list(self.encoder_widths),
            "dropout_p": self.dropout_p,
            "preset": self.preset,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AEConfig":
        return cls(
            int(data["input_width"]),
            tuple(data["encoder_widths"]),
            float(data["dropout_p"]),
            str(data["preset"]),
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        if self.batch_size < 2:
            raise ConfigError("batch size must be at least 2 (batchnorm)")
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "shuffle": self.shuffle,
        }


class Autoencoder:
    """Untrained encoder/decoder chain; `train` turns it into a TrainedModel."""

    def __init__(self, config: AEConfig, network: Network):
        self.config = config
        self.network = network

    @property
    def n_linear_layers(self) -> int:
        return len(self.network.stages)


def build(config: AEConfig, seed=0) -> Autoencoder:
    """Encoder blocks down to the latent width, mirrored decoder back up."""
    rng = np.random.default_rng(seed)
    widths = (config.input_width,) + config.encoder_widths
    stages = []
    for a, b in zip(widths, widths[1:]):
        stages.append(LinearBlock.create(a, b, config.dropout_p, rng))
    mirrored = widths[::-1]
    for a, b in zip(mirrored, mirrored[1:-1]):
        stages.append(LinearBlock.create(a, b, config.dropout_p, rng))
    stages.append(LinearLayer(mirrored[-2], mirrored[-1], rng))
    return Autoencoder(config, Network(stages))


@dataclass
class TrainedModel:
    network: Network
    config: AEConfig
    standardizer: Standardizer | None
    loss_history: list = field(default_factory=list)
    seed: int = 0

    def reconstruct(self, v) -> np.ndarray:
        """Deterministic inference-mode forward pass for one vector or a batch."""
        arr = np.asarray(v, dtype=np.float64)
        single = arr.ndim == 1
        batch = arr.reshape(1, -1) if single else arr
        if batch.shape[1] != self.config.input_width:
            raise ShapeError(
                f"model expects width {self.config.input_width}, got {batch.shape[1]}"
            )
        out = self.network.forward(batch, Mode.INFERENCE)
        return out[0] if single else out

    def reconstruction_errors(self, clips) -> np.ndarray:
        """Per-clip mean absolute difference, the same reduction as training."""
        clips = np.asarray(clips, dtype=np.float64)
        if clips.ndim != 2:
            raise ShapeError("clips must form a 2-D batch")
        if clips.shape[0] == 0:
            return np.zeros(0)
        recon = self.reconstruct(clips)
        return np.mean(np.abs(clips - recon), axis=1)


def train(model: Autoencoder, vectors, train_config: TrainConfig,
          standardizer: Standardizer | None = None) -> TrainedModel:
    """Minimize L1 reconstruction loss with Adam; deterministic given seed.

    `vectors` must already be standardized and must come from the train
    split (normal-only, enforced at manifest load). A trailing partial
    batch of size 1 cannot pass batchnorm and is dropped with a warning.
    """
    X = np.ascontiguousarray(vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.config.input_width:
        raise ShapeError(
            f"training vectors must be 2-D with width {model.config.input_width}"
        )
    if X.shape[0] < 2:
        raise DataValidationError("training needs at least 2 vectors")
    n = X.shape[0]
    rng = np.random.default_rng(train_config.seed)
    opt = AdamState(learning_rate=train_config.learning_rate)

    warned = False
    history = []
    for _ in range(train_config.epochs):
        order = rng.permutation(n) if train_config.shuffle else np.arange(n)
        loss_sum = 0.0
        seen = 0
        for start in range(0, n, train_config.batch_size):
            batch_idx = order[start:start + train_config.batch_size]
            if batch_idx.size < 2:
                if not warned:
                    warnings.warn(
                        "dropping a trailing batch of size 1 (batchnorm needs >= 2)",
                        stacklevel=2,
                    )
                    warned = True
                continue
            batch = X[batch_idx]
            pred = model.network.forward(batch, Mode.TRAINING, rng)
            loss = l1_loss(pred, batch)
            model.network.backward(l1_loss_grad(pred, batch))
            pairs = model.network.parameters()
            adam_step([p for p, _ in pairs], [g for _, g in pairs], opt)
            loss_sum += loss * batch_idx.size
            seen += batch_idx.size
        if seen == 0:
            raise DataValidationError(
                "an epoch contained no trainable batch; provide more vectors or "
                "a smaller batch size"
            )
        history.append(loss_sum / seen)

    return TrainedModel(
        network=model.network,
        config=model.config,
        standardizer=standardizer,
        loss_history=history,
        seed=train_config.seed,
    )


# ---------------------------------------------------------------------------
# checkpointing: network + standardizer + config in one JSON file

def checkpoint_dict(model: TrainedModel, modalities_name: str = "vision",
                    fusion_options: dict | None = None,
                    train_config: TrainConfig | None = None) -> dict:
    return {
        "format_version": CHECKPOINT_VERSION,
        "kind": "hriad-autoencoder",
        "seed": model.seed,
        "modalities": modalities_name,
        "fusion": dict(fusion_options or {}),
        "train_config": train_config.to_dict() if train_config else None,
        "ae_config": model.config.to_dict(),
        "standardizer": model.standardizer.to_dict() if model.standardizer else None,
        "loss_history": list(model.loss_history),
        "network": network_to_dict(model.network),
    }


def save_checkpoint(path, model: TrainedModel, **meta) -> None:
    atomic_write_text(path, json.dumps(checkpoint_dict(model, **meta), sort_keys=True) + "\n")


def load_checkpoint(path):
    """Returns (TrainedModel, metadata dict)."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise DataValidationError(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"{path}: malformed checkpoint JSON: {exc}") from exc
    if data.get("kind") != "hriad-autoencoder":
        raise DataValidationError(f"{path}: not an autoencoder checkpoint")
    model = TrainedModel(
        network=network_from_dict(data["network"]),
        config=AEConfig.from_dict(data["ae_config"]),
        standardizer=(
            Standardizer.from_dict(data["standardizer"]) if data.get("standardizer") else None
        ),
        loss_history=list(data.get("loss_history", [])),
        seed=data.get("seed", 0),
    )
    meta = {
        "modalities": data.get("modalities", "vision"),
        "fusion": data.get("fusion", {}),
        "train_config": data.get("train_config"),
    }
    return model, meta
