import numpy as np
import pytest

from hriad import synth
from hriad.dataio import load_manifest


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Small full-modality dataset shared by dataio/eval/cli tests."""
    out = tmp_path_factory.mktemp("tiny_dataset")
    scenario = synth.ScenarioConfig(clips_per_phase=1, geometry_seed=3)
    manifest_path = synth.generate_dataset(
        out,
        n_normal_train=5,
        n_normal_test=1,
        anomaly_mix={"drop_cup": 1, "torque_limit": 1},
        scenario=scenario,
        master_seed=3,
    )
    return manifest_path


@pytest.fixture(scope="session")
def tiny_manifest(tiny_dataset):
    return load_manifest(tiny_dataset)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
