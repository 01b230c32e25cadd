"""Clip windows, temporal sensor pooling, scene-graph flattening,
concatenation and per-dimension standardization.

Every fused vector is laid out vision | sensor | scene-graph, in that
fixed order, so segments can be recovered by slicing at config-determined
offsets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import CLIP_FRAMES, ModalityConfig
from .errors import ConfigError, DataValidationError, ShapeError


@dataclass(frozen=True)
class ClipWindow:
    clip_index: int
    frame_start: int
    frame_end: int  # exclusive
    time_start: float
    time_end: float  # exclusive

    @property
    def frame_range(self):
        return (self.frame_start, self.frame_end)

    @property
    def time_range(self):
        return (self.time_start, self.time_end)


def clip_windows(frame_count: int, fps: float) -> list:
    """Whole 32-frame windows; a trailing partial clip is dropped."""
    if not fps > 0:
        raise ConfigError("fps must be positive")
    n = int(frame_count) // CLIP_FRAMES
    windows = []
    for i in range(n):
        f0 = i * CLIP_FRAMES
        f1 = f0 + CLIP_FRAMES
        windows.append(ClipWindow(i, f0, f1, f0 / fps, f1 / fps))
    return windows


def pool_sensor(log, window: ClipWindow, pool_abs: bool = False) -> np.ndarray:
    """Per-channel max over samples with timestamps inside the window.

    `pool_abs` pools magnitudes instead of raw signed values. A window with
    no samples is an error; use pool_sensor_series for forward-fill.
    """
    mask = (log.timestamps >= window.time_start) & (log.timestamps < window.time_end)
    if not mask.any():
        raise DataValidationError(
            f"{log.video_id}: no sensor samples in clip {window.clip_index} "
            f"[{window.time_start:.3f}, {window.time_end:.3f})s"
        )
    rows = log.channels[mask]
    if pool_abs:
        rows = np.abs(rows)
    return rows.max(axis=0)


def pool_sensor_series(log, windows, policy: str = "error", pool_abs: bool = False) -> np.ndarray:
    """Pool every window; `policy` decides what an empty window does.

    "error" fails on the first empty window; "forward-fill" repeats the
    previous window's pooled vector (an empty first window is always an
    error, there is nothing to repeat).
    """
    if policy not in ("error", "forward-fill"):
        raise ConfigError(f"unknown pooling policy {policy!r}")
    pooled = np.empty((len(windows), log.n_channels))
    for i, window in enumerate(windows):
        try:
            pooled[i] = pool_sensor(log, window, pool_abs=pool_abs)
        except DataValidationError:
            if policy == "error" or i == 0:
                raise
            pooled[i] = pooled[i - 1]
    return pooled


def flatten_scene_graph(matrix) -> np.ndarray:
    """Row-major (object-major) flattening of one clip's matrix."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ShapeError("scene-graph clip entry must be a 2-D matrix")
    if matrix.size and (matrix.min() < 0.0 or matrix.max() > 1.0):
        raise DataValidationError("scene-graph entries must lie in [0, 1]")
    return matrix.reshape(-1).copy()


def fused_width(config: ModalityConfig, feature_width: int,
                n_channels: int = 0, n_objects: int = 0, n_relations: int = 0) -> int:
    width = feature_width
    if config.use_sensor:
        width += n_channels
    if config.use_scenegraph:
        width += n_objects * n_relations
    return width


def fuse(vision, sensor, scenegraph, config: ModalityConfig) -> np.ndarray:
    """Concatenate one clip's segments in the fixed order."""
    vision = np.asarray(vision, dtype=np.float64).reshape(-1)
    parts = [vision]
    if config.use_sensor:
        if sensor is None:
            raise ConfigError("config enables the sensor modality but no segment was given")
        parts.append(np.asarray(sensor, dtype=np.float64).reshape(-1))
    elif sensor is not None:
        raise ConfigError("sensor segment given but the config disables that modality")
    if config.use_scenegraph:
        if scenegraph is None:
            raise ConfigError("config enables the scene-graph modality but no segment was given")
        parts.append(np.asarray(scenegraph, dtype=np.float64).reshape(-1))
    elif scenegraph is not None:
        raise ConfigError("scene-graph segment given but the config disables that modality")
    return np.concatenate(parts)


def fuse_video(entry, features, sensor, scenegraph, config: ModalityConfig,
               pool_policy: str = "error", pool_abs: bool = False) -> np.ndarray:
    """Fused matrix (n_clips x W) for one loaded video."""
    windows = clip_windows(entry.frame_count, entry.fps)
    if features.n_clips != len(windows):
        raise DataValidationError(
            f"{entry.id}: feature rows do not match the clip windows"
        )
    pooled = None
    if config.use_sensor:
        if sensor is None:
            raise ConfigError(f"{entry.id}: sensor modality requested but not loaded")
        pooled = pool_sensor_series(sensor, windows, policy=pool_policy, pool_abs=pool_abs)
    rows = []
    for w in windows:
        sg_vec = None
        if config.use_scenegraph:
            if scenegraph is None:
                raise ConfigError(f"{entry.id}: scene-graph modality requested but not loaded")
            sg_vec = flatten_scene_graph(scenegraph.matrices[w.clip_index])
        sensor_vec = pooled[w.clip_index] if pooled is not None else None
        rows.append(fuse(features.vectors[w.clip_index], sensor_vec, sg_vec, config))
    if not rows:
        return np.zeros((0, fused_width(config, features.width)))
    return np.vstack(rows)


class Standardizer:
    """Per-dimension z-scoring fitted on train-split fused vectors.

    Standard deviations are floored so constant dimensions map to 0 instead
    of dividing by zero; inversion is exact wherever std > floor.
    """

    def __init__(self, mean, std, floor: float = 1e-6):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)
        self.floor = float(floor)
        if self.floor <= 0:
            raise ConfigError("std floor must be positive")
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ShapeError("standardizer mean/std must be 1-D and the same length")
        self.std = np.maximum(self.std, self.floor)

    @classmethod
    def fit(cls, vectors, floor: float = 1e-6) -> "Standardizer":
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] < 2:
            raise DataValidationError("standardizer fit needs at least 2 vectors")
        return cls(vectors.mean(axis=0), vectors.std(axis=0), floor=floor)

    def apply(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape[-1] != self.mean.shape[0]:
            raise ShapeError(
                f"standardizer fitted for width {self.mean.shape[0]}, got {v.shape[-1]}"
            )
        return (v - self.mean) / self.std

    def invert(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        return v * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "floor": self.floor}

    @classmethod
    def from_dict(cls, data: dict) -> "Standardizer":
        return cls(data["mean"], data["std"], floor=data["floor"])


def write_fused_csv(path, video_ids, clip_indices, vectors) -> None:
    """Optional inspection cache for fused datasets (regenerable)."""
    from .ioutil import atomic_write_text

    vectors = np.asarray(vectors, dtype=np.float64)
    lines = ["video_id,clip_index," + ",".join(f"x{i}" for i in range(vectors.shape[1]))]
    for vid, ci, row in zip(video_ids, clip_indices, vectors):
        lines.append(f"{vid},{ci}," + ",".join(repr(float(v)) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")
