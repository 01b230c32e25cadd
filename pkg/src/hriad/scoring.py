"""Per-video score normalization, F1 threshold sweeps and flagging.

Errors are min-max normalized within each video: the model learns what
normal looks like, and the threshold separates each sequence's own error
profile. A flat (all-equal) profile carries no anomaly evidence, so it
normalizes to all zeros and nothing is flagged at any positive threshold.

The decision rule is `score >= threshold`; pass strict=True for the
strictly-greater variant (exposed on the CLI as --strict-gt).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError


@dataclass
class ScoreSeries:
    video_id: str
    raw_errors: np.ndarray
    normalized: np.ndarray

    def __post_init__(self):
        self.raw_errors = np.asarray(self.raw_errors, dtype=np.float64)
        self.normalized = np.asarray(self.normalized, dtype=np.float64)
        if self.raw_errors.shape != self.normalized.shape:
            raise ShapeError("raw and normalized error lengths differ")


@dataclass
class ThresholdResult:
    threshold: float
    f1: float
    precision: float
    recall: float
    predictions: np.ndarray


def normalize_errors(raw) -> np.ndarray:
    """Min-max rescale one video's errors to [0, 1]; all-equal maps to zeros."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 1 or raw.size == 0:
        raise ShapeError("normalize_errors needs a non-empty 1-D series")
    if not np.isfinite(raw).all():
        raise ShapeError("reconstruction errors must be finite")
    lo = raw.min()
    hi = raw.max()
    if hi == lo:
        return np.zeros_like(raw)
    return (raw - lo) / (hi - lo)


def _check_scores_labels(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ShapeError("scores and labels must be 1-D and the same length")
    if labels.size and not np.isin(labels, (0, 1)).all():
        raise ShapeError("labels must be 0 or 1")
    return scores, labels


def f1_at_threshold(normalized, labels, threshold: float, strict: bool = False):
    """F1/precision/recall of flagging scores >= threshold (or > if strict).

    Precision is 0 when nothing is flagged and F1 is 0 when precision and
    recall are both 0, so degenerate sweeps stay well defined.
    """
    scores, labels = _check_scores_labels(normalized, labels)
    preds = (scores > threshold) if strict else (scores >= threshold)
    preds = preds.astype(np.int64)
    tp = int(np.sum((preds == 1) & (labels == 1)))
    fp = int(np.sum((preds == 1) & (labels == 0)))
    fn = int(np.sum((preds == 0) & (labels == 1)))
    precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return f1, precision, recall, preds


def select_threshold(normalized, labels, strict: bool = False) -> ThresholdResult:
    """Best-F1 threshold over the observed score values plus the endpoints.

    F1 as a function of the threshold is a step function that only changes
    at observed scores, so this candidate set is sufficient. Ties go to the
    smallest threshold.
    """
    scores, labels = _check_scores_labels(normalized, labels)
    if scores.size == 0:
        raise ShapeError("select_threshold needs a non-empty series")
    candidates = np.unique(np.concatenate([scores, [0.0, 1.0]]))
    best = None
    for t in candidates:
        f1, precision, recall, preds = f1_at_threshold(scores, labels, float(t), strict=strict)
        if best is None or f1 > best.f1:
            best = ThresholdResult(float(t), f1, precision, recall, preds)
    return best


def percentile_threshold(train_normalized, q: float) -> float:
    """Label-free threshold: q-th percentile of normal-only normalized errors."""
    arr = np.asarray(train_normalized, dtype=np.float64)
    if arr.size == 0:
        raise ShapeError("percentile_threshold needs a non-empty series")
    if not 0.0 < q <= 100.0:
        raise ConfigError("percentile q must lie in (0, 100]")
    return float(np.percentile(arr, q))
