import numpy as np
import pytest

from hriad.errors import ConfigError, ShapeError
from hriad.scoring import (
    f1_at_threshold,
    normalize_errors,
    percentile_threshold,
    select_threshold,
)


def f1_by_confusion_counts(scores, labels, t, strict=False):
    # independent confusion-count oracle
    tp = fp = fn = 0
    for s, l in zip(scores, labels):
        flagged = s > t if strict else s >= t
        if flagged and l == 1:
            tp += 1
        elif flagged and l == 0:
            fp += 1
        elif not flagged and l == 1:
            fn += 1
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return 2 * p * r / (p + r) if p + r else 0.0


class TestNormalizeErrors:
    def test_hand_min_max_oracle(self):
        assert np.array_equal(normalize_errors([2.0, 4.0, 6.0]), [0.0, 0.5, 1.0])

    def test_degenerate_all_equal_maps_to_zeros(self):
        assert np.array_equal(normalize_errors([5.0, 5.0, 5.0]), [0.0, 0.0, 0.0])

    def test_idempotent_on_extremes(self):
        assert np.array_equal(normalize_errors([0.0, 1.0]), [0.0, 1.0])

    def test_empty_series_rejected(self):
        with pytest.raises(ShapeError):
            normalize_errors([])

    def test_range_and_order_preserved(self, rng):
        for _ in range(500):
            raw = rng.normal(size=int(rng.integers(1, 40))) * rng.uniform(0.1, 100)
            out = normalize_errors(raw)
            assert out.min() >= 0.0 and out.max() <= 1.0
            if np.unique(raw).size == 1:
                assert np.array_equal(out, np.zeros_like(out))
            else:
                assert np.array_equal(np.argsort(raw, kind="stable"),
                                      np.argsort(out, kind="stable"))
                assert np.argmax(raw) == np.argmax(out)


class TestF1AtThreshold:
    def test_perfect_separation(self):
        f1, p, r, preds = f1_at_threshold([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1], 0.8)
        assert (f1, p, r) == (1.0, 1.0, 1.0)
        assert np.array_equal(preds, [0, 0, 1, 1])

    def test_zero_threshold_full_recall(self):
        _, _, r, preds = f1_at_threshold([0.3, 0.6, 0.2], [0, 1, 1], 0.0)
        assert r == 1.0
        assert preds.sum() == 3

    def test_all_negative_labels_f1_zero(self):
        for t in (0.0, 0.5, 1.0):
            f1, _, _, _ = f1_at_threshold([0.1, 0.9], [0, 0], t)
            assert f1 == 0.0

    def test_matches_confusion_count_oracle(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 30))
            scores = rng.random(n)
            labels = rng.integers(0, 2, size=n)
            t = float(rng.random())
            f1, _, _, _ = f1_at_threshold(scores, labels, t)
            assert f1 == f1_by_confusion_counts(scores, labels, t)

    def test_strict_gt_variant(self):
        f1, _, _, preds = f1_at_threshold([0.5, 1.0], [0, 1], 0.5, strict=True)
        assert np.array_equal(preds, [0, 1])
        assert f1 == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            f1_at_threshold([0.1], [0, 1], 0.5)


class TestSelectThreshold:
    def test_exhaustive_sweep_oracle(self):
        result = select_threshold([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])
        assert result.threshold == 0.8
        assert result.f1 == 1.0

    def test_all_normal_tie_breaks_to_zero(self):
        result = select_threshold([0.3, 0.6], [0, 0])
        assert result.f1 == 0.0
        assert result.threshold == 0.0

    def test_single_anomalous_clip_degenerate_normalization(self):
        # one clip, label 1: after degenerate normalization its score is 0
        scores = normalize_errors([0.7])
        result = select_threshold(scores, [1])
        assert result.threshold == 0.0
        assert result.f1 == 1.0

    def test_predictions_consistent_with_threshold(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 40))
            scores = rng.integers(0, 1001, size=n) / 1000.0
            labels = rng.integers(0, 2, size=n)
            res = select_threshold(scores, labels)
            assert np.array_equal(res.predictions, (scores >= res.threshold).astype(int))
            # selected F1 beats both endpoints
            assert res.f1 >= f1_by_confusion_counts(scores, labels, 0.0)
            assert res.f1 >= f1_by_confusion_counts(scores, labels, 1.0)

    def test_beats_dense_grid_on_random_instances(self, rng):
        # scores on a 1e-3 lattice so every F1 plateau is wider than the
        # 1e-4 grid step; the candidate sweep must then match the grid max
        grid = np.linspace(0.0, 1.0, 10_001)
        for _ in range(40):
            n = int(rng.integers(1, 64))
            scores = rng.integers(0, 1001, size=n) / 1000.0
            labels = rng.integers(0, 2, size=n)
            res = select_threshold(scores, labels)
            grid_best = max(f1_at_threshold(scores, labels, t)[0] for t in grid)
            assert res.f1 == grid_best


class TestPercentileThreshold:
    def test_median(self):
        assert percentile_threshold([0.0, 0.5, 1.0], 50) == 0.5

    def test_q100_is_max(self):
        assert percentile_threshold([0.2, 0.9, 0.4], 100) == 0.9

    def test_linear_interpolation_oracle(self):
        # (n-1) * 0.75 = 2.25 -> 0.3 + 0.25 * (0.4 - 0.3)
        assert np.isclose(percentile_threshold([0.1, 0.2, 0.3, 0.4], 75), 0.325, atol=1e-15)

    def test_domain_checks(self):
        with pytest.raises(ShapeError):
            percentile_threshold([], 50)
        with pytest.raises(ConfigError):
            percentile_threshold([0.5], 0.0)
        with pytest.raises(ConfigError):
            percentile_threshold([0.5], 101)
