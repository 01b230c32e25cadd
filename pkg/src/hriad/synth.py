"""Deterministic synthetic multimodal episode generator with anomaly injection.

Episodes walk through a pick-and-place phase sequence. Per phase, feature
vectors cluster around a fixed class prototype, torque channels follow
smooth waveforms, the gripper tracks whether the manipulator is holding
anything, and the scene graph encodes phase-appropriate relations.

All randomness is drawn during base (normal) generation; anomaly injection
afterwards is pure arithmetic. Re-generating the same scenario seed with a
different anomaly list therefore changes only the injected arrays, which is
what makes the modality-ordering experiments meaningful:

- drop_cup     feature prototype slides off-manifold, holds-relations drop
- torque_limit sustained torque elevation only (vision stays blind)
- extra_person scene-graph row activation only
- collision    feature deviation plus a mid-window torque spike
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import (
    CLIP_FRAMES,
    ClipFeatureSet,
    ClipLabels,
    MANIFEST_VERSION,
    SceneGraphMatrix,
    SensorLog,
    write_features_csv,
    write_labels_csv,
    write_manifest,
    write_scenegraph_json,
    write_sensor_csv,
)
from .errors import ConfigError
from .ioutil import atomic_write_text

PHASES = (
    "idle",
    "move_no_cup",
    "human_handover",
    "move_with_cup",
    "place",
    "robot_picking_object",
    "robot_handover",
)

DEFAULT_PHASE_SEQUENCE = (
    "idle",
    "human_handover",
    "move_with_cup",
    "place",
    "move_no_cup",
    "robot_picking_object",
    "move_with_cup",
    "robot_handover",
)

ANOMALY_KINDS = ("drop_cup", "torque_limit", "extra_person", "collision")

DEFAULT_MAGNITUDE = {
    "drop_cup": 0.8,      # norm of the off-manifold feature shift
    "torque_limit": 5.0,  # torque elevation above the episode max
    "extra_person": 0.9,  # activation level of the extra object's row
    "collision": 0.8,     # feature shift norm; torque spike is 4x this
}

DEFAULT_ANOMALY_MIX = {"drop_cup": 7, "torque_limit": 5, "extra_person": 3, "collision": 2}

# object row / relation column assignments used by templates and injection
OBJ_ROBOT, OBJ_HUMAN, OBJ_CUP = 0, 1, 2
REL_HOLDS, REL_NEAR = 0, 1

_OBJECT_NAMES = ("robot", "human", "cup", "table")
_RELATION_NAMES = ("holds", "near", "touching", "above", "approaching", "watching")

# phases during which the gripper is closed around the cup
_HOLDING_PHASES = frozenset({"move_with_cup", "place", "robot_handover"})


@dataclass(frozen=True)
class ScenarioConfig:
    phase_sequence: tuple = DEFAULT_PHASE_SEQUENCE
    clips_per_phase: int = 2
    feature_width: int = 768
    sensor_channels: int = 8  # torques first, the last channel is the gripper
    n_objects: int = 5
    n_relations: int = 6
    fps: float = 15.0
    sensor_rate_hz: float = 100.0
    feature_noise: float = 0.01
    sensor_noise: float = 0.05
    scenegraph_noise: float = 0.02
    feature_norm: float = 1.0
    geometry_seed: int = 0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "phase_sequence", tuple(self.phase_sequence))
        if not self.phase_sequence:
            raise ConfigError("scenario needs at least one phase")
        unknown = [p for p in self.phase_sequence if p not in PHASES]
        if unknown:
            raise ConfigError(f"unknown phases: {unknown}; known: {list(PHASES)}")
        if self.clips_per_phase < 1:
            raise ConfigError("clips_per_phase must be positive")
        if self.feature_width < 1:
            raise ConfigError("feature width must be positive")
        if self.sensor_channels < 2:
            raise ConfigError("need at least one torque channel plus the gripper")
        if self.n_objects < 4 or self.n_relations < 2:
            raise ConfigError("scene-graph vocab too small (need >= 4 objects, >= 2 relations)")
        if not (self.fps > 0 and self.sensor_rate_hz > 0):
            raise ConfigError("fps and sensor rate must be positive")

    @property
    def phase_per_clip(self) -> tuple:
        out = []
        for phase in self.phase_sequence:
            out.extend([phase] * self.clips_per_phase)
        return tuple(out)

    @property
    def n_clips(self) -> int:
        return len(self.phase_sequence) * self.clips_per_phase

    @property
    def frame_count(self) -> int:
        return self.n_clips * CLIP_FRAMES

    @property
    def n_torque_channels(self) -> int:
        return self.sensor_channels - 1

    def channel_names(self) -> list:
        return [f"torque_{i}" for i in range(self.n_torque_channels)] + ["gripper_0"]

    def object_names(self) -> list:
        names = list(_OBJECT_NAMES[: self.n_objects - 1])
        names += [f"obj_{i}" for i in range(len(names), self.n_objects - 1)]
        return names + ["extra_person"]

    def relation_names(self) -> list:
        names = list(_RELATION_NAMES[: self.n_relations])
        names += [f"rel_{i}" for i in range(len(names), self.n_relations)]
        return names


@dataclass(frozen=True)
class AnomalySpec:
    kind: str
    start_clip: int
    duration_clips: int = 2
    magnitude: float | None = None

    def __post_init__(self):
        if self.kind not in ANOMALY_KINDS:
            raise ConfigError(f"unknown anomaly kind {self.kind!r}; known: {list(ANOMALY_KINDS)}")
        if self.duration_clips < 1:
            raise ConfigError("anomaly duration must be at least 1 clip")
        if self.start_clip < 0:
            raise ConfigError("anomaly start clip must be non-negative")

    @property
    def effect(self) -> float:
        return DEFAULT_MAGNITUDE[self.kind] if self.magnitude is None else float(self.magnitude)

    @property
    def clip_range(self):
        return range(self.start_clip, self.start_clip + self.duration_clips)


@dataclass
class EpisodeBundle:
    video_id: str
    features: ClipFeatureSet
    sensor: SensorLog
    scenegraph: SceneGraphMatrix
    labels: ClipLabels
    frame_count: int
    fps: float


class ClassGeometry:
    """Fixed per-class structure shared by all episodes of one dataset.

    Prototypes are unit-norm random vectors scaled to the configured norm;
    the off-manifold anomaly directions are two further unit vectors. All
    of it derives from the geometry seed alone.
    """

    def __init__(self, scenario: ScenarioConfig):
        rng = np.random.default_rng(np.random.SeedSequence([int(scenario.geometry_seed), 0xA5]))
        w = scenario.feature_width

        def unit(vec):
            return vec / np.linalg.norm(vec)

        self.prototypes = {
            phase: scenario.feature_norm * unit(rng.standard_normal(w)) for phase in PHASES
        }
        self.drop_dir = unit(rng.standard_normal(w))
        self.collision_dir = unit(rng.standard_normal(w))

        n_torque = scenario.n_torque_channels
        self.torque_baseline = {}
        self.torque_amp = {}
        self.torque_freq = {}
        self.torque_phase = {}
        for phase in PHASES:
            self.torque_baseline[phase] = rng.uniform(0.3, 1.2, n_torque)
            self.torque_amp[phase] = rng.uniform(0.1, 0.5, n_torque)
            self.torque_freq[phase] = rng.uniform(0.2, 1.0, n_torque)
            self.torque_phase[phase] = rng.uniform(0.0, 2 * np.pi, n_torque)

        self.sg_templates = {
            phase: self._template(phase, scenario.n_objects, scenario.n_relations)
            for phase in PHASES
        }

    @staticmethod
    def _template(phase: str, n_objects: int, n_relations: int) -> np.ndarray:
        t = np.full((n_objects, n_relations), 0.05)
        t[-1, :] = 0.02  # the extra-person row stays quiet in normal episodes
        if phase == "idle":
            t[OBJ_HUMAN, REL_NEAR] = 0.2
        elif phase == "move_no_cup":
            t[OBJ_ROBOT, REL_NEAR] = 0.7
        elif phase == "human_handover":
            t[OBJ_HUMAN, REL_HOLDS] = 0.9
            t[OBJ_CUP, REL_HOLDS] = 0.9
            t[OBJ_ROBOT, REL_NEAR] = 0.8
        elif phase == "move_with_cup":
            t[OBJ_ROBOT, REL_HOLDS] = 0.9
            t[OBJ_CUP, REL_HOLDS] = 0.9
        elif phase == "place":
            t[OBJ_ROBOT, REL_HOLDS] = 0.6
            t[OBJ_CUP, REL_HOLDS] = 0.6
            t[OBJ_CUP, REL_NEAR] = 0.8
        elif phase == "robot_picking_object":
            t[OBJ_ROBOT, REL_NEAR] = 0.9
            t[OBJ_CUP, REL_NEAR] = 0.7
        elif phase == "robot_handover":
            t[OBJ_ROBOT, REL_HOLDS] = 0.7
            t[OBJ_CUP, REL_HOLDS] = 0.7
            t[OBJ_HUMAN, REL_NEAR] = 0.9
        return t


def _validate_anomalies(anomalies, n_clips: int):
    for anomaly in anomalies:
        if anomaly.start_clip + anomaly.duration_clips > n_clips:
            raise ConfigError(
                f"anomaly {anomaly.kind!r} at clips "
                f"[{anomaly.start_clip}, {anomaly.start_clip + anomaly.duration_clips}) "
                f"falls outside the {n_clips}-clip episode"
            )


def generate_episode(scenario: ScenarioConfig, anomalies=(), video_id: str = "episode") -> EpisodeBundle:
    """One multimodal episode; deterministic given the scenario seeds."""
    anomalies = list(anomalies)
    _validate_anomalies(anomalies, scenario.n_clips)
    geometry = ClassGeometry(scenario)
    phases = scenario.phase_per_clip
    n_clips = scenario.n_clips
    rng = np.random.default_rng(np.random.SeedSequence([int(scenario.seed), 0x5E]))

    # base features: per-clip prototype plus isotropic noise
    features = np.empty((n_clips, scenario.feature_width))
    for c, phase in enumerate(phases):
        features[c] = geometry.prototypes[phase]
    features += scenario.feature_noise * rng.standard_normal(features.shape)

    # base sensors: smooth torque waveforms, gripper tracks the holding state
    duration_s = scenario.frame_count / scenario.fps
    n_samples = int(np.floor(duration_s * scenario.sensor_rate_hz))
    t = np.arange(n_samples) / scenario.sensor_rate_hz
    clip_of_sample = np.minimum((t * scenario.fps // CLIP_FRAMES).astype(int), n_clips - 1)
    channels = np.empty((n_samples, scenario.sensor_channels))
    n_torque = scenario.n_torque_channels
    for c in range(n_clips):
        mask = clip_of_sample == c
        phase = phases[c]
        tw = t[mask]
        wave = geometry.torque_baseline[phase] + geometry.torque_amp[phase] * np.sin(
            2 * np.pi * geometry.torque_freq[phase] * tw[:, None] + geometry.torque_phase[phase]
        )
        channels[mask, :n_torque] = wave
        channels[mask, n_torque] = 1.0 if phase in _HOLDING_PHASES else 0.0
    channels[:, :n_torque] += scenario.sensor_noise * rng.standard_normal((n_samples, n_torque))
    channels[:, n_torque] = np.clip(
        channels[:, n_torque] + 0.02 * rng.standard_normal(n_samples), 0.0, 1.0
    )

    # base scene graph: per-phase relation template plus clipped noise
    sg = np.empty((n_clips, scenario.n_objects, scenario.n_relations))
    for c, phase in enumerate(phases):
        sg[c] = geometry.sg_templates[phase]
    sg = np.clip(sg + scenario.scenegraph_noise * rng.standard_normal(sg.shape), 0.0, 1.0)

    # anomaly injection: deterministic, no further rng draws
    labels = np.zeros(n_clips, dtype=np.int64)
    base_torque_max = channels[:, :n_torque].max(axis=0) if n_samples else None
    window_s = CLIP_FRAMES / scenario.fps
    affected_torques = list(range(min(3, n_torque)))
    for anomaly in anomalies:
        m = anomaly.effect
        for c in anomaly.clip_range:
            labels[c] = 1
            phase = phases[c]
            if anomaly.kind == "drop_cup":
                mix = 0.5 * (geometry.prototypes["idle"] + geometry.prototypes[phase])
                features[c] += (mix - geometry.prototypes[phase]) + m * geometry.drop_dir
                sg[c, OBJ_ROBOT, REL_HOLDS] = 0.05
                sg[c, OBJ_CUP, REL_HOLDS] = 0.05
            elif anomaly.kind == "torque_limit":
                mask = clip_of_sample == c
                for ch in affected_torques:
                    channels[mask, ch] = base_torque_max[ch] + m
            elif anomaly.kind == "extra_person":
                sg[c, -1, :] = min(m, 1.0)
            elif anomaly.kind == "collision":
                features[c] += m * geometry.collision_dir
                t0 = c * window_s
                mid = (t >= t0 + window_s / 3) & (t < t0 + 2 * window_s / 3)
                channels[np.ix_(mid, affected_torques)] += 4.0 * m

    return EpisodeBundle(
        video_id=video_id,
        features=ClipFeatureSet(video_id, features),
        sensor=SensorLog(video_id, t, channels, scenario.channel_names()),
        scenegraph=SceneGraphMatrix(video_id, sg),
        labels=ClipLabels(video_id, labels),
        frame_count=scenario.frame_count,
        fps=scenario.fps,
    )


def describe(scenario: ScenarioConfig, anomalies=()) -> str:
    """Stable human-readable summary of a scenario and its anomaly list."""
    anomalies = list(anomalies)
    lines = [
        f"phases ({len(scenario.phase_sequence)}): " + " -> ".join(scenario.phase_sequence),
        f"clips: {scenario.n_clips} ({scenario.clips_per_phase} per phase, "
        f"{CLIP_FRAMES} frames each at {scenario.fps:g} fps)",
        f"features: {scenario.feature_width}-dim, noise {scenario.feature_noise:g}",
        f"sensors: {scenario.n_torque_channels} torque + 1 gripper at "
        f"{scenario.sensor_rate_hz:g} samples/s, noise {scenario.sensor_noise:g}",
        f"scene graph: {scenario.n_objects} objects x {scenario.n_relations} relations, "
        f"noise {scenario.scenegraph_noise:g}",
        f"{len(anomalies)} anomalies",
    ]
    for anomaly in anomalies:
        lines.append(
            f"  - {anomaly.kind} at clips [{anomaly.start_clip}, "
            f"{anomaly.start_clip + anomaly.duration_clips}), magnitude {anomaly.effect:g}"
        )
    return "\n".join(lines)


def _write_episode(out_dir: Path, bundle: EpisodeBundle) -> dict:
    vid = bundle.video_id
    write_features_csv(out_dir / f"{vid}_features.csv", bundle.features.vectors)
    write_sensor_csv(
        out_dir / f"{vid}_sensor.csv",
        bundle.sensor.timestamps,
        bundle.sensor.channels,
        bundle.sensor.channel_names,
    )
    write_scenegraph_json(out_dir / f"{vid}_scenegraph.json", bundle.scenegraph.matrices)
    write_labels_csv(out_dir / f"{vid}_labels.csv", bundle.labels.labels)
    return {
        "id": vid,
        "features": f"{vid}_features.csv",
        "sensor": f"{vid}_sensor.csv",
        "scenegraph": f"{vid}_scenegraph.json",
        "labels": f"{vid}_labels.csv",
        "frame_count": bundle.frame_count,
        "fps": bundle.fps,
    }


def generate_dataset(out_dir, n_normal_train: int = 55, n_normal_test: int = 0,
                     anomaly_mix=None, scenario: ScenarioConfig | None = None,
                     master_seed: int = 0, anomaly_duration: int = 2) -> Path:
    """Write a full synthetic dataset in the manifest/CSV formats.

    The train split is normal-only; each anomalous test episode carries one
    injected anomaly with a start clip drawn from the master seed. Returns
    the manifest path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if anomaly_mix is None:
        anomaly_mix = dict(DEFAULT_ANOMALY_MIX)
    unknown = [k for k in anomaly_mix if k not in ANOMALY_KINDS]
    if unknown:
        raise ConfigError(f"unknown anomaly kinds in mix: {unknown}")
    if scenario is None:
        scenario = ScenarioConfig(geometry_seed=master_seed)
    n_clips = scenario.n_clips
    if n_clips < anomaly_duration + 2:
        raise ConfigError("episodes are too short for the requested anomaly duration")

    master_rng = np.random.default_rng(master_seed)

    def next_seed() -> int:
        return int(master_rng.integers(0, 2**63))

    videos = []
    episode_log = []

    def emit(bundle: EpisodeBundle, split: str, anomalies, seed: int):
        entry = _write_episode(out_dir, bundle)
        entry["split"] = split
        videos.append(entry)
        episode_log.append(
            {
                "id": bundle.video_id,
                "split": split,
                "seed": seed,
                "anomalies": [dataclasses.asdict(a) for a in anomalies],
            }
        )

    for i in range(n_normal_train):
        seed = next_seed()
        ep = generate_episode(
            dataclasses.replace(scenario, seed=seed), [], video_id=f"train_{i:03d}"
        )
        emit(ep, "train", [], seed)

    for i in range(n_normal_test):
        seed = next_seed()
        ep = generate_episode(
            dataclasses.replace(scenario, seed=seed), [], video_id=f"test_normal_{i:03d}"
        )
        emit(ep, "test", [], seed)

    for kind in ANOMALY_KINDS:
        for j in range(int(anomaly_mix.get(kind, 0))):
            seed = next_seed()
            start = int(master_rng.integers(1, n_clips - anomaly_duration))
            anomaly = AnomalySpec(kind, start, anomaly_duration)
            ep = generate_episode(
                dataclasses.replace(scenario, seed=seed),
                [anomaly],
                video_id=f"test_{kind}_{j:02d}",
            )
            emit(ep, "test", [anomaly], seed)

    manifest = {
        "version": MANIFEST_VERSION,
        "feature_width": scenario.feature_width,
        "sensor_channels": scenario.channel_names(),
        "scenegraph_objects": scenario.object_names(),
        "scenegraph_relations": scenario.relation_names(),
        "modalities": {"use_vision": True, "use_sensor": True, "use_scenegraph": True},
        "videos": videos,
    }
    manifest_path = out_dir / "manifest.json"
    write_manifest(manifest_path, manifest)

    spec_blob = {
        "master_seed": int(master_seed),
        "scenario": dataclasses.asdict(dataclasses.replace(scenario, seed=0)),
        "n_normal_train": n_normal_train,
        "n_normal_test": n_normal_test,
        "anomaly_mix": {k: int(anomaly_mix.get(k, 0)) for k in ANOMALY_KINDS},
        "anomaly_duration": anomaly_duration,
        "episodes": episode_log,
    }
    atomic_write_text(out_dir / "spec.json", json.dumps(spec_blob, indent=2, sort_keys=True) + "\n")
    return manifest_path
