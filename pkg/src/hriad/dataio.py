"""Dataset manifest and per-modality file IO.

On-disk layout (paths in the manifest are relative to the manifest file):

- manifest JSON: version, feature_width, channel/vocab lists, modality
  flags, video entries.
- features CSV: `clip_index,f0..f<W-1>`, one row per clip.
- sensor CSV: `timestamp_s,<channel names>`, strictly increasing timestamps.
- labels CSV: `clip_index,label` with label in {0, 1}.
- scene graph JSON: list indexed by clip, each an objects x relations
  matrix of floats in [0, 1].

Floats are written with shortest-repr formatting, so write -> load
round-trips bit-exactly. Any length or width mismatch is a hard error;
nothing is silently truncated or padded.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataValidationError
from .ioutil import atomic_write_text

CLIP_FRAMES = 32
DEFAULT_FEATURE_WIDTH = 768
MANIFEST_VERSION = 1


def clips_for_frames(frame_count: int) -> int:
    """Clip-count law: whole 32-frame windows only, remainder dropped."""
    return int(frame_count) // CLIP_FRAMES


# ---------------------------------------------------------------------------
# modality configuration

_MODALITY_TOKENS = {
    "vision": (False, False),
    "vision+sensor": (True, False),
    "vision+sg": (False, True),
    "vision+scenegraph": (False, True),
    "all": (True, True),
}


@dataclass(frozen=True)
class ModalityConfig:
    use_vision: bool = True
    use_sensor: bool = False
    use_scenegraph: bool = False

    def __post_init__(self):
        if not self.use_vision:
            raise ConfigError("vision is the base modality and cannot be disabled")

    @classmethod
    def from_name(cls, token: str) -> "ModalityConfig":
        key = token.strip().lower()
        if key not in _MODALITY_TOKENS:
            raise ConfigError(
                f"unknown modality config {token!r}; expected one of "
                f"{sorted(set(_MODALITY_TOKENS))}"
            )
        sensor, sg = _MODALITY_TOKENS[key]
        return cls(use_vision=True, use_sensor=sensor, use_scenegraph=sg)

    @property
    def name(self) -> str:
        if self.use_sensor and self.use_scenegraph:
            return "all"
        if self.use_sensor:
            return "vision+sensor"
        if self.use_scenegraph:
            return "vision+sg"
        return "vision"

    def is_subset_of(self, other: "ModalityConfig") -> bool:
        return (not self.use_sensor or other.use_sensor) and (
            not self.use_scenegraph or other.use_scenegraph
        )


# ---------------------------------------------------------------------------
# loaded per-video structures

@dataclass
class ClipFeatureSet:
    video_id: str
    vectors: np.ndarray  # (n_clips, width)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise DataValidationError(f"{self.video_id}: feature array must be 2-D")
        if not np.isfinite(self.vectors).all():
            raise DataValidationError(f"{self.video_id}: non-finite feature value")

    @property
    def n_clips(self) -> int:
        return self.vectors.shape[0]

    @property
    def width(self) -> int:
        return self.vectors.shape[1]


@dataclass
class SensorLog:
    video_id: str
    timestamps: np.ndarray  # (n_samples,), seconds
    channels: np.ndarray  # (n_samples, n_channels)
    channel_names: tuple

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        self.channels = np.asarray(self.channels, dtype=np.float64)
        self.channel_names = tuple(self.channel_names)
        if self.timestamps.ndim != 1 or self.channels.ndim != 2:
            raise DataValidationError(f"{self.video_id}: malformed sensor arrays")
        if self.channels.shape[0] != self.timestamps.shape[0]:
            raise DataValidationError(f"{self.video_id}: sensor row count mismatch")
        if self.channels.shape[1] != len(self.channel_names):
            raise DataValidationError(f"{self.video_id}: sensor channel count mismatch")
        if not (np.isfinite(self.timestamps).all() and np.isfinite(self.channels).all()):
            raise DataValidationError(f"{self.video_id}: non-finite sensor value")
        if self.timestamps.size > 1 and not (np.diff(self.timestamps) > 0).all():
            raise DataValidationError(
                f"{self.video_id}: sensor timestamps must be strictly increasing"
            )

    @property
    def n_channels(self) -> int:
        return self.channels.shape[1]


@dataclass
class SceneGraphMatrix:
    video_id: str
    matrices: np.ndarray  # (n_clips, n_objects, n_relations), entries in [0, 1]

    def __post_init__(self):
        self.matrices = np.asarray(self.matrices, dtype=np.float64)
        if self.matrices.ndim != 3:
            raise DataValidationError(f"{self.video_id}: scene-graph array must be 3-D")
        if not np.isfinite(self.matrices).all():
            raise DataValidationError(f"{self.video_id}: non-finite scene-graph value")
        if self.matrices.size and (
            self.matrices.min() < 0.0 or self.matrices.max() > 1.0
        ):
            raise DataValidationError(
                f"{self.video_id}: scene-graph entries must lie in [0, 1]"
            )

    @property
    def n_clips(self) -> int:
        return self.matrices.shape[0]


@dataclass
class ClipLabels:
    video_id: str
    labels: np.ndarray  # (n_clips,), 1 marks an anomalous clip

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1:
            raise DataValidationError(f"{self.video_id}: labels must be 1-D")
        if self.labels.size and not np.isin(self.labels, (0, 1)).all():
            raise DataValidationError(f"{self.video_id}: labels must be 0 or 1")

    @property
    def n_clips(self) -> int:
        return self.labels.shape[0]


@dataclass
class VideoEntry:
    id: str
    split: str  # "train" or "test"
    features_path: str
    frame_count: int
    fps: float
    sensor_path: str | None = None
    scenegraph_path: str | None = None
    labels_path: str | None = None

    def __post_init__(self):
        if self.split not in ("train", "test"):
            raise DataValidationError(f"{self.id}: split must be 'train' or 'test'")
        if int(self.frame_count) < 0:
            raise DataValidationError(f"{self.id}: negative frame count")
        if not self.fps > 0:
            raise DataValidationError(f"{self.id}: fps must be positive")

    @property
    def n_clips(self) -> int:
        return clips_for_frames(self.frame_count)


@dataclass
class DatasetManifest:
    root: Path
    version: int
    feature_width: int
    modalities: ModalityConfig
    videos: list
    sensor_channels: tuple = ()
    scenegraph_objects: tuple = ()
    scenegraph_relations: tuple = ()
    source_path: Path | None = field(default=None, repr=False)

    def video(self, video_id: str) -> VideoEntry:
        for entry in self.videos:
            if entry.id == video_id:
                return entry
        raise DataValidationError(f"unknown video id: {video_id!r}")

    def split(self, name: str) -> list:
        return [v for v in self.videos if v.split == name]

    def resolve(self, rel_path: str) -> Path:
        return self.root / rel_path


# ---------------------------------------------------------------------------
# CSV / JSON readers

def _read_csv_rows(path: Path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataValidationError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataValidationError(f"{path}: empty file")
    return rows[0], rows[1:]


def _parse_float(text: str, path, what: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise DataValidationError(f"{path}: bad {what} value {text!r}") from exc


def _check_clip_index_column(indices, n_rows, path):
    if indices != list(range(n_rows)):
        raise DataValidationError(f"{path}: clip_index column must run 0..{n_rows - 1} in order")


def load_features_csv(path, video_id: str, width: int) -> ClipFeatureSet:
    header, rows = _read_csv_rows(Path(path))
    expected = ["clip_index"] + [f"f{i}" for i in range(width)]
    if header != expected:
        raise DataValidationError(
            f"{path}: bad features header (expected clip_index,f0..f{width - 1})"
        )
    indices, vectors = [], []
    for row in rows:
        if len(row) != width + 1:
            raise DataValidationError(
                f"{path}: feature row has {len(row) - 1} values, expected {width}"
            )
        indices.append(int(row[0]))
        vectors.append([_parse_float(v, path, "feature") for v in row[1:]])
    _check_clip_index_column(indices, len(rows), path)
    data = np.asarray(vectors, dtype=np.float64).reshape(len(rows), width)
    return ClipFeatureSet(video_id, data)


def load_sensor_csv(path, video_id: str, channel_names) -> SensorLog:
    header, rows = _read_csv_rows(Path(path))
    expected = ["timestamp_s"] + list(channel_names)
    if header != expected:
        raise DataValidationError(f"{path}: sensor header does not match manifest channels")
    stamps, values = [], []
    for row in rows:
        if len(row) != len(expected):
            raise DataValidationError(f"{path}: sensor row width changes mid-file")
        stamps.append(_parse_float(row[0], path, "timestamp"))
        values.append([_parse_float(v, path, "sensor") for v in row[1:]])
    data = np.asarray(values, dtype=np.float64).reshape(len(rows), len(channel_names))
    return SensorLog(video_id, np.asarray(stamps), data, tuple(channel_names))


def load_labels_csv(path, video_id: str) -> ClipLabels:
    header, rows = _read_csv_rows(Path(path))
    if header != ["clip_index", "label"]:
        raise DataValidationError(f"{path}: bad labels header")
    indices, labels = [], []
    for row in rows:
        if len(row) != 2:
            raise DataValidationError(f"{path}: bad labels row {row!r}")
        indices.append(int(row[0]))
        labels.append(int(row[1]))
    _check_clip_index_column(indices, len(rows), path)
    return ClipLabels(video_id, np.asarray(labels, dtype=np.int64))


def load_scenegraph_json(path, video_id: str, n_objects: int, n_relations: int) -> SceneGraphMatrix:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise DataValidationError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"{path}: malformed scene-graph JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise DataValidationError(f"{path}: scene-graph file must be a list of matrices")
    data = np.asarray(raw, dtype=np.float64)
    if data.ndim != 3 or data.shape[1:] != (n_objects, n_relations):
        raise DataValidationError(
            f"{path}: scene-graph matrices must be {n_objects}x{n_relations} per clip"
        )
    return SceneGraphMatrix(video_id, data)


# ---------------------------------------------------------------------------
# writers (shortest-repr floats: exact round-trip)

def _fmt(x) -> str:
    return repr(float(x))


def write_features_csv(path, vectors) -> None:
    vectors = np.asarray(vectors, dtype=np.float64)
    lines = ["clip_index," + ",".join(f"f{i}" for i in range(vectors.shape[1]))]
    for i, row in enumerate(vectors):
        lines.append(f"{i}," + ",".join(_fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_sensor_csv(path, timestamps, channels, channel_names) -> None:
    channels = np.asarray(channels, dtype=np.float64)
    lines = ["timestamp_s," + ",".join(channel_names)]
    for t, row in zip(timestamps, channels):
        lines.append(_fmt(t) + "," + ",".join(_fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_labels_csv(path, labels) -> None:
    lines = ["clip_index,label"]
    for i, lab in enumerate(labels):
        lines.append(f"{i},{int(lab)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_scenegraph_json(path, matrices) -> None:
    matrices = np.asarray(matrices, dtype=np.float64)
    atomic_write_text(path, json.dumps(matrices.tolist()))


def write_manifest(path, manifest_dict) -> None:
    atomic_write_text(path, json.dumps(manifest_dict, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# manifest loading

def _missing_modalities(manifest: DatasetManifest, entry: VideoEntry) -> list:
    missing = []
    if entry.features_path is None or not manifest.resolve(entry.features_path).exists():
        missing.append("features")
    if manifest.modalities.use_sensor and (
        entry.sensor_path is None or not manifest.resolve(entry.sensor_path).exists()
    ):
        missing.append("sensor")
    if manifest.modalities.use_scenegraph and (
        entry.scenegraph_path is None
        or not manifest.resolve(entry.scenegraph_path).exists()
    ):
        missing.append("scenegraph")
    return missing


def load_manifest(path, skip_incomplete: bool = False) -> DatasetManifest:
    """Parse and validate a dataset manifest.

    With ``skip_incomplete``, videos missing a file for an enabled modality
    are dropped with a warning instead of failing the whole load.
    Cross-file dimension checks happen later, in ``load_video``; the
    train-on-normal contract is enforced here because it gates everything
    downstream.
    """
    path = Path(path)
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise DataValidationError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"{path}: malformed manifest JSON: {exc}") from exc

    if "version" not in raw:
        raise DataValidationError(f"{path}: manifest is missing the required version field")

    videos_raw = raw.get("videos", [])
    entries = []
    for video in videos_raw:
        try:
            entries.append(
                VideoEntry(
                    id=str(video["id"]),
                    split=str(video["split"]).lower(),
                    features_path=video.get("features"),
                    sensor_path=video.get("sensor"),
                    scenegraph_path=video.get("scenegraph"),
                    labels_path=video.get("labels"),
                    frame_count=int(video["frame_count"]),
                    fps=float(video["fps"]),
                )
            )
        except KeyError as exc:
            raise DataValidationError(f"{path}: video entry missing field {exc}") from exc

    ids = [e.id for e in entries]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise DataValidationError(f"{path}: duplicate video ids: {dupes}")

    if "modalities" in raw:
        m = raw["modalities"]
        modalities = ModalityConfig(
            use_vision=bool(m.get("use_vision", True)),
            use_sensor=bool(m.get("use_sensor", False)),
            use_scenegraph=bool(m.get("use_scenegraph", False)),
        )
    else:
        modalities = ModalityConfig(
            use_sensor=any(e.sensor_path for e in entries),
            use_scenegraph=any(e.scenegraph_path for e in entries),
        )

    manifest = DatasetManifest(
        root=path.parent,
        version=int(raw["version"]),
        feature_width=int(raw.get("feature_width", DEFAULT_FEATURE_WIDTH)),
        modalities=modalities,
        videos=entries,
        sensor_channels=tuple(raw.get("sensor_channels", ())),
        scenegraph_objects=tuple(raw.get("scenegraph_objects", ())),
        scenegraph_relations=tuple(raw.get("scenegraph_relations", ())),
        source_path=path,
    )

    if modalities.use_sensor and not manifest.sensor_channels:
        raise DataValidationError(f"{path}: sensor modality enabled but no sensor_channels")
    if modalities.use_scenegraph and not (
        manifest.scenegraph_objects and manifest.scenegraph_relations
    ):
        raise DataValidationError(f"{path}: scene-graph modality enabled but vocab missing")

    kept = []
    for entry in manifest.videos:
        missing = _missing_modalities(manifest, entry)
        if missing:
            if skip_incomplete:
                warnings.warn(
                    f"skipping video {entry.id!r}: missing {', '.join(missing)} file(s)",
                    stacklevel=2,
                )
                continue
            raise DataValidationError(
                f"{path}: video {entry.id!r} is missing {', '.join(missing)} file(s)"
            )
        kept.append(entry)
    manifest.videos = kept

    # Train-on-normal contract: the model must never see a labeled anomaly.
    for entry in manifest.videos:
        if entry.split == "train" and entry.labels_path is not None:
            labels = load_labels_csv(manifest.resolve(entry.labels_path), entry.id)
            if labels.labels.any():
                raise DataValidationError(
                    f"{path}: train video {entry.id!r} contains anomalous clips; "
                    "the train split must hold normal behaviour only"
                )
    return manifest


def load_video(manifest: DatasetManifest, video_id: str):
    """Load every enabled modality for one video, with cross-file checks.

    Returns (features, sensor or None, scenegraph or None, labels or None).
    """
    entry = manifest.video(video_id)
    n_clips = entry.n_clips

    features = load_features_csv(
        manifest.resolve(entry.features_path), video_id, manifest.feature_width
    )
    if features.n_clips != n_clips:
        raise DataValidationError(
            f"{video_id}: {features.n_clips} feature rows but frame_count "
            f"{entry.frame_count} implies {n_clips} clips"
        )

    sensor = None
    if manifest.modalities.use_sensor:
        sensor = load_sensor_csv(
            manifest.resolve(entry.sensor_path), video_id, manifest.sensor_channels
        )

    scenegraph = None
    if manifest.modalities.use_scenegraph:
        scenegraph = load_scenegraph_json(
            manifest.resolve(entry.scenegraph_path),
            video_id,
            len(manifest.scenegraph_objects),
            len(manifest.scenegraph_relations),
        )
        if scenegraph.n_clips != n_clips:
            raise DataValidationError(
                f"{video_id}: scene-graph clip count {scenegraph.n_clips} != {n_clips}"
            )

    labels = None
    if entry.labels_path is not None:
        labels = load_labels_csv(manifest.resolve(entry.labels_path), video_id)
        if labels.n_clips != n_clips:
            raise DataValidationError(
                f"{video_id}: label count {labels.n_clips} != clip count {n_clips}"
            )

    return features, sensor, scenegraph, labels


# ---------------------------------------------------------------------------
# temporal alignment report

@dataclass
class AlignmentReport:
    video_id: str
    gap_clips: list  # clip indices whose time window holds no sensor sample

    @property
    def ok(self) -> bool:
        return not self.gap_clips


def validate_alignment(features: ClipFeatureSet, sensor: SensorLog, fps: float) -> AlignmentReport:
    """Report clips whose time window contains no sensor sample."""
    from .fusion import clip_windows

    windows = clip_windows(features.n_clips * CLIP_FRAMES, fps)
    gaps = []
    for w in windows:
        in_window = (sensor.timestamps >= w.time_start) & (sensor.timestamps < w.time_end)
        if not in_window.any():
            gaps.append(w.clip_index)
    return AlignmentReport(features.video_id, gaps)
