"""ROC/AUC, confusion counts, the modality ablation runner and reports.

ROC pools clips across all test videos after per-video normalization, so a
single curve summarizes each modality configuration. Every configuration in
an ablation trains and scores on the identical clip set, with its own seeds
derived from (master seed, config name); duplicate configs therefore
produce identical entries.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataio, fusion
from .autoencoder import AEConfig, TrainConfig, TrainedModel, build, train
from .errors import ConfigError, DataValidationError, ShapeError
from .ioutil import atomic_write_text, canonical_json, sha256_file, sha256_text
from .scoring import ScoreSeries, normalize_errors, select_threshold


@dataclass
class RocCurve:
    thresholds: np.ndarray  # descending, starting at +inf
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_curve(scores, labels) -> RocCurve:
    """ROC over sorted unique scores (ties grouped), AUC by trapezoid."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ShapeError("scores and labels must be 1-D and the same length")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataValidationError("AUC undefined: labels must contain both classes")

    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    l = labels[order]
    tp = np.cumsum(l)
    fp = np.cumsum(1 - l)
    # one point per distinct score: take the last index of each tie group
    group_ends = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tpr = tp[group_ends] / n_pos
    fpr = fp[group_ends] / n_neg
    thresholds = np.r_[np.inf, s[group_ends]]
    tpr = np.r_[0.0, tpr]
    fpr = np.r_[0.0, fpr]
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(thresholds, fpr, tpr, auc)


@dataclass
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(predictions, labels) -> ConfusionMatrix:
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.shape != labels.shape or predictions.ndim != 1:
        raise ShapeError("predictions and labels must be 1-D and the same length")
    return ConfusionMatrix(
        tp=int(np.sum((predictions == 1) & (labels == 1))),
        fp=int(np.sum((predictions == 1) & (labels == 0))),
        tn=int(np.sum((predictions == 0) & (labels == 0))),
        fn=int(np.sum((predictions == 0) & (labels == 1))),
    )


# ---------------------------------------------------------------------------
# dataset assembly

def load_fused_split(manifest, config, split: str,
                     pool_policy: str = "error", pool_abs: bool = False):
    """[(entry, fused matrix, ClipLabels or None)] for one split."""
    if not config.is_subset_of(manifest.modalities):
        raise DataValidationError(
            f"config {config.name!r} requests a modality the dataset does not provide "
            f"(dataset has {manifest.modalities.name!r})"
        )
    out = []
    for entry in manifest.split(split):
        features, sensor, scenegraph, labels = dataio.load_video(manifest, entry.id)
        X = fusion.fuse_video(
            entry,
            features,
            sensor if config.use_sensor else None,
            scenegraph if config.use_scenegraph else None,
            config,
            pool_policy=pool_policy,
            pool_abs=pool_abs,
        )
        out.append((entry, X, labels))
    return out


@dataclass
class VideoScores:
    series: ScoreSeries
    labels: np.ndarray
    threshold: float
    f1: float
    predictions: np.ndarray


@dataclass
class AblationEntry:
    name: str
    modalities: dataio.ModalityConfig
    auc: float
    best_f1: float
    roc: RocCurve
    videos: list
    n_clips: int
    n_anomalous: int
    init_seed: int
    train_seed: int
    final_train_loss: float


@dataclass
class AblationReport:
    entries: list
    master_seed: int
    dataset_hash: str
    defaults: dict = field(default_factory=dict)


def score_test_videos(model: TrainedModel, fused_test, strict: bool = False):
    """Per-video normalized scores plus the F1-optimal threshold of each."""
    videos = []
    for entry, X, labels in fused_test:
        if labels is None:
            raise DataValidationError(
                f"test video {entry.id!r} has no labels; evaluation needs them"
            )
        Xs = model.standardizer.apply(X) if model.standardizer is not None else X
        raw = model.reconstruction_errors(Xs)
        normalized = normalize_errors(raw)
        picked = select_threshold(normalized, labels.labels, strict=strict)
        videos.append(
            VideoScores(
                series=ScoreSeries(entry.id, raw, normalized),
                labels=labels.labels,
                threshold=picked.threshold,
                f1=picked.f1,
                predictions=picked.predictions,
            )
        )
    return videos


def evaluate_model(model: TrainedModel, manifest, config,
                   pool_policy: str = "error", pool_abs: bool = False,
                   strict: bool = False, name: str | None = None,
                   init_seed: int = 0, train_seed: int = 0) -> AblationEntry:
    """Score the test split with a trained model and pool a single ROC."""
    fused_test = load_fused_split(manifest, config, "test",
                                  pool_policy=pool_policy, pool_abs=pool_abs)
    if not fused_test:
        raise DataValidationError("the test split is empty")
    videos = score_test_videos(model, fused_test, strict=strict)
    pooled_scores = np.concatenate([v.series.normalized for v in videos])
    pooled_labels = np.concatenate([v.labels for v in videos])
    roc = roc_curve(pooled_scores, pooled_labels)
    pooled_best = select_threshold(pooled_scores, pooled_labels, strict=strict)
    return AblationEntry(
        name=name or config.name,
        modalities=config,
        auc=roc.auc,
        best_f1=pooled_best.f1,
        roc=roc,
        videos=videos,
        n_clips=int(pooled_labels.size),
        n_anomalous=int(pooled_labels.sum()),
        init_seed=init_seed,
        train_seed=train_seed,
        final_train_loss=float(model.loss_history[-1]) if model.loss_history else float("nan"),
    )


def _config_seeds(master_seed: int, name: str):
    token = int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "little")
    ss = np.random.SeedSequence([int(master_seed), token])
    init_ss, train_ss = ss.spawn(2)
    return (
        int(init_ss.generate_state(1, np.uint64)[0]),
        int(train_ss.generate_state(1, np.uint64)[0]),
    )


def default_preset_for(config) -> str:
    return "vision_only" if config.name == "vision" else "multimodal"


def train_for_config(manifest, config, train_config: TrainConfig, master_seed: int = 0,
                     preset: str | None = None, custom_widths=None,
                     dropout_p: float = 0.1, standardize: bool = True,
                     pool_policy: str = "error", pool_abs: bool = False):
    """Fuse the train split, fit the standardizer, train one autoencoder.

    Returns (TrainedModel, init_seed, train_seed).
    """
    fused_train = load_fused_split(manifest, config, "train",
                                   pool_policy=pool_policy, pool_abs=pool_abs)
    blocks = [X for _, X, _ in fused_train if X.shape[0]]
    if not blocks:
        raise DataValidationError("the train split holds no clips")
    X = np.vstack(blocks)
    standardizer = fusion.Standardizer.fit(X) if standardize else None
    Xs = standardizer.apply(X) if standardizer is not None else X

    preset = preset or default_preset_for(config)
    ae_config = AEConfig.for_preset(preset, X.shape[1], dropout_p, widths=custom_widths)

    init_seed, train_seed = _config_seeds(master_seed, config.name)
    tc = dataclasses.replace(train_config, seed=train_seed)
    model = build(ae_config, init_seed)
    trained = train(model, Xs, tc, standardizer)
    return trained, init_seed, train_seed


def run_ablation(manifest, configs, train_config: TrainConfig, master_seed: int = 0,
                 preset: str | None = None, custom_widths=None, dropout_p: float = 0.1,
                 standardize: bool = True, pool_policy: str = "error",
                 pool_abs: bool = False, strict: bool = False) -> AblationReport:
    """Train and evaluate one model per modality configuration.

    All configs see the identical test clip set; per-config seeds come from
    (master seed, config name) so results do not depend on list order.
    """
    if manifest.source_path is None:
        raise ConfigError("run_ablation needs a manifest loaded from disk")
    entries = []
    for config in configs:
        trained, init_seed, train_seed = train_for_config(
            manifest, config, train_config, master_seed,
            preset=preset, custom_widths=custom_widths, dropout_p=dropout_p,
            standardize=standardize, pool_policy=pool_policy, pool_abs=pool_abs,
        )
        entries.append(
            evaluate_model(
                trained, manifest, config,
                pool_policy=pool_policy, pool_abs=pool_abs, strict=strict,
                init_seed=init_seed, train_seed=train_seed,
            )
        )
    defaults = {
        "train_config": train_config.to_dict(),
        "preset": preset or "per-config default",
        "dropout_p": dropout_p,
        "standardize": standardize,
        "pool_policy": pool_policy,
        "pool_abs": pool_abs,
        "strict_gt": strict,
    }
    return AblationReport(
        entries=entries,
        master_seed=int(master_seed),
        dataset_hash=sha256_file(manifest.source_path),
        defaults=defaults,
    )


# ---------------------------------------------------------------------------
# report emission

def _roc_csv(curve: RocCurve) -> str:
    lines = ["threshold,fpr,tpr"]
    for t, x, y in zip(curve.thresholds, curve.fpr, curve.tpr):
        t_txt = "inf" if np.isinf(t) else repr(float(t))
        lines.append(f"{t_txt},{float(x)!r},{float(y)!r}")
    return "\n".join(lines) + "\n"


def scores_csv_text(videos, with_labels: bool = True) -> str:
    header = "video_id,clip_index,raw_error,normalized_error,prediction"
    if with_labels:
        header += ",label"
    lines = [header]
    for v in videos:
        for i in range(v.series.raw_errors.size):
            row = (
                f"{v.series.video_id},{i},{float(v.series.raw_errors[i])!r},"
                f"{float(v.series.normalized[i])!r},{int(v.predictions[i])}"
            )
            if with_labels:
                row += f",{int(v.labels[i])}"
            lines.append(row)
    return "\n".join(lines) + "\n"


def _entry_summary(entry: AblationEntry) -> dict:
    config_blob = canonical_json(
        {
            "modalities": entry.modalities.name,
            "init_seed": entry.init_seed,
            "train_seed": entry.train_seed,
        }
    )
    return {
        "name": entry.name,
        "auc": entry.auc,
        "best_f1": entry.best_f1,
        "n_clips": entry.n_clips,
        "n_anomalous": entry.n_anomalous,
        "config_hash": sha256_text(config_blob),
        "init_seed": entry.init_seed,
        "train_seed": entry.train_seed,
        "final_train_loss": entry.final_train_loss,
        "thresholds_per_video": {
            v.series.video_id: v.threshold for v in entry.videos
        },
        "roc_csv": f"roc_{entry.name}.csv",
        "scores_csv": f"scores_{entry.name}.csv",
    }


def emit_report(report: AblationReport, out_dir) -> list:
    """Write summary JSON plus per-config ROC and score CSVs; returns paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    summary = {
        "version": 1,
        "dataset_hash": report.dataset_hash,
        "master_seed": report.master_seed,
        "defaults": report.defaults,
        "configs": [_entry_summary(e) for e in report.entries],
    }
    summary_path = out_dir / "summary.json"
    atomic_write_text(summary_path, canonical_json(summary) + "\n")
    written.append(summary_path)
    for entry in report.entries:
        roc_path = out_dir / f"roc_{entry.name}.csv"
        atomic_write_text(roc_path, _roc_csv(entry.roc))
        written.append(roc_path)
        scores_path = out_dir / f"scores_{entry.name}.csv"
        atomic_write_text(scores_path, scores_csv_text(entry.videos))
        written.append(scores_path)
    return written
