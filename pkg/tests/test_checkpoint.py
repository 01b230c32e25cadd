import json

import numpy as np
import pytest

from hriad.autoencoder import (
    AEConfig,
    TrainConfig,
    build,
    load_checkpoint,
    save_checkpoint,
    train,
)
from hriad.errors import DataValidationError
from hriad.nn import Mode, network_from_dict, network_to_dict


def small_trained_model(rng, epochs=3):
    cfg = AEConfig(10, (6, 3), dropout_p=0.1)
    X = rng.normal(size=(24, 10))
    return train(build(cfg, seed=1), X, TrainConfig(epochs=epochs, batch_size=8, seed=2))


def test_network_dict_roundtrip_is_bit_exact(rng):
    model = small_trained_model(rng)
    data = network_to_dict(model.network)
    restored = network_from_dict(json.loads(json.dumps(data)))
    for a, b in zip(model.network.stages, restored.stages):
        for (pa, _), (pb, _) in zip(a.parameters(), b.parameters()):
            assert np.array_equal(pa, pb)
    x = rng.normal(size=(4, 10))
    assert np.array_equal(
        model.network.forward(x, Mode.INFERENCE), restored.forward(x, Mode.INFERENCE)
    )


def test_checkpoint_file_roundtrip(tmp_path, rng):
    model = small_trained_model(rng)
    path = tmp_path / "model.json"
    save_checkpoint(path, model, modalities_name="vision+sensor",
                    fusion_options={"pool_policy": "error", "pool_abs": False})
    restored, meta = load_checkpoint(path)
    assert meta["modalities"] == "vision+sensor"
    assert restored.config == model.config
    assert restored.loss_history == model.loss_history
    v = rng.normal(size=10)
    assert np.array_equal(model.reconstruct(v), restored.reconstruct(v))
    # running stats come back bit-exactly too
    assert np.array_equal(
        model.network.stages[0].norm.running_var, restored.network.stages[0].norm.running_var
    )


def test_save_load_save_is_byte_identical(tmp_path, rng):
    model = small_trained_model(rng)
    p1 = tmp_path / "a.json"
    p2 = tmp_path / "b.json"
    save_checkpoint(p1, model)
    restored, _ = load_checkpoint(p1)
    save_checkpoint(p2, restored)
    assert p1.read_bytes() == p2.read_bytes()


def test_wrong_kind_rejected(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text(json.dumps({"kind": "something-else"}))
    with pytest.raises(DataValidationError):
        load_checkpoint(path)
