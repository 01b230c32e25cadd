"""Command-line entry point: synth, train, score, eval and ablate.

Exit codes: 0 success, 2 usage/config error, 3 data validation error,
4 runtime or IO error. A JSON config file may supply any flag (keys are
flag names with dashes or underscores); explicit command-line flags win.
All randomness flows from --seed; reruns with identical arguments rewrite
outputs with identical content.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import evaluation, synth
from .autoencoder import TrainConfig, load_checkpoint, save_checkpoint
from .dataio import ModalityConfig, load_manifest
from .errors import ConfigError, DataValidationError, ShapeError
from .evaluation import VideoScores, scores_csv_text
from .fusion import fused_width
from .ioutil import atomic_write_text
from .scoring import ScoreSeries, normalize_errors, percentile_threshold, select_threshold


def _require(args, name: str):
    value = getattr(args, name.replace("-", "_"))
    if value is None:
        raise ConfigError(f"missing required flag --{name}")
    return value


def _parse_mix(text: str) -> dict:
    mix = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"bad --mix entry {part!r}; expected kind=count")
        kind, count = part.split("=", 1)
        try:
            mix[kind.strip()] = int(count)
        except ValueError as exc:
            raise ConfigError(f"bad --mix count in {part!r}") from exc
    return mix


def _parse_widths(text):
    if text is None:
        return None
    try:
        return tuple(int(w) for w in text.split(",") if w.strip())
    except ValueError as exc:
        raise ConfigError(f"bad --widths value {text!r}") from exc


def _parse_configs(text: str):
    tokens = [tok for tok in (t.strip() for t in text.split(",")) if tok]
    if not tokens:
        raise ConfigError("--configs needs at least one modality token")
    return [ModalityConfig.from_name(tok) for tok in tokens]


def _resolve_preset(preset, config: ModalityConfig) -> str:
    if preset is None or preset == "auto":
        return evaluation.default_preset_for(config)
    if preset == "vision":
        preset = "vision_only"
    if preset == "multimodal" and config.name == "vision":
        raise ConfigError(
            "the multimodal preset needs a sensor or scene-graph modality; "
            "this run is vision-only"
        )
    return preset


def _fusion_meta(args) -> dict:
    return {
        "pool_policy": args.pool_policy,
        "pool_abs": bool(args.pool_abs),
        "standardize": not args.no_standardize,
    }


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(args) -> int:
    out = Path(_require(args, "out"))
    scenario = synth.ScenarioConfig(
        clips_per_phase=args.clips_per_phase,
        feature_width=args.feature_width,
        feature_noise=args.feature_noise,
        sensor_noise=args.sensor_noise,
        scenegraph_noise=args.sg_noise,
        geometry_seed=args.seed,
    )
    mix = _parse_mix(args.mix) if args.mix is not None else None
    manifest_path = synth.generate_dataset(
        out,
        n_normal_train=args.n_train,
        n_normal_test=args.n_test_normal,
        anomaly_mix=mix,
        scenario=scenario,
        master_seed=args.seed,
        anomaly_duration=args.anomaly_duration,
    )
    effective_mix = mix if mix is not None else synth.DEFAULT_ANOMALY_MIX
    n_anom = sum(effective_mix.values())
    print(f"wrote dataset: {manifest_path}")
    print(
        f"  {args.n_train} normal train, {args.n_test_normal} normal test, "
        f"{n_anom} anomalous test episodes"
    )
    return 0


def cmd_train(args) -> int:
    manifest = load_manifest(_require(args, "manifest"), skip_incomplete=args.skip_incomplete)
    out = Path(_require(args, "out"))
    config = ModalityConfig.from_name(args.modalities)
    preset = _resolve_preset(args.preset, config)
    template = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        seed=args.seed,
        shuffle=not args.no_shuffle,
    )
    trained, _, _ = evaluation.train_for_config(
        manifest,
        config,
        template,
        master_seed=args.seed,
        preset=preset,
        custom_widths=_parse_widths(args.widths),
        dropout_p=args.dropout,
        standardize=not args.no_standardize,
        pool_policy=args.pool_policy,
        pool_abs=args.pool_abs,
    )
    save_checkpoint(
        out,
        trained,
        modalities_name=config.name,
        fusion_options=_fusion_meta(args),
        train_config=template,
    )
    print(f"wrote checkpoint: {out}")
    print(f"final training loss: {trained.loss_history[-1]!r}")
    return 0


def _load_for_scoring(args):
    model, meta = load_checkpoint(_require(args, "checkpoint"))
    manifest = load_manifest(_require(args, "manifest"), skip_incomplete=args.skip_incomplete)
    config = ModalityConfig.from_name(meta.get("modalities", "vision"))
    fusion_meta = meta.get("fusion", {})
    pool_policy = fusion_meta.get("pool_policy", "error")
    pool_abs = bool(fusion_meta.get("pool_abs", False))
    expected = fused_width(
        config,
        manifest.feature_width,
        n_channels=len(manifest.sensor_channels),
        n_objects=len(manifest.scenegraph_objects),
        n_relations=len(manifest.scenegraph_relations),
    )
    if expected != model.config.input_width:
        raise DataValidationError(
            f"checkpoint expects fused width {model.config.input_width} but this "
            f"manifest fuses {config.name!r} to width {expected}"
        )
    return model, manifest, config, pool_policy, pool_abs


def cmd_score(args) -> int:
    model, manifest, config, pool_policy, pool_abs = _load_for_scoring(args)
    out = Path(_require(args, "out"))
    fused = evaluation.load_fused_split(
        manifest, config, args.split, pool_policy=pool_policy, pool_abs=pool_abs
    )
    if not fused:
        raise DataValidationError(f"split {args.split!r} holds no videos")

    strict = bool(args.strict_gt)
    if args.threshold_mode == "percentile":
        train_fused = evaluation.load_fused_split(
            manifest, config, "train", pool_policy=pool_policy, pool_abs=pool_abs
        )
        train_norm = []
        for _, X, _ in train_fused:
            if X.shape[0] == 0:
                continue
            Xs = model.standardizer.apply(X) if model.standardizer else X
            train_norm.append(normalize_errors(model.reconstruction_errors(Xs)))
        if not train_norm:
            raise DataValidationError("percentile mode needs a non-empty train split")
        threshold = percentile_threshold(np.concatenate(train_norm), args.q)
    else:
        threshold = None  # per-video F1-optimal selection below

    videos = []
    have_labels = True
    for entry, X, labels in fused:
        Xs = model.standardizer.apply(X) if model.standardizer else X
        raw = model.reconstruction_errors(Xs)
        normalized = normalize_errors(raw)
        if threshold is None:
            if labels is None:
                raise DataValidationError(
                    f"video {entry.id!r} has no labels; F1 threshold selection needs "
                    "them (use --threshold-mode percentile for label-free scoring)"
                )
            picked = select_threshold(normalized, labels.labels, strict=strict)
            thr, preds = picked.threshold, picked.predictions
        else:
            thr = threshold
            preds = ((normalized > thr) if strict else (normalized >= thr)).astype(np.int64)
        have_labels = have_labels and labels is not None
        videos.append(
            VideoScores(
                series=ScoreSeries(entry.id, raw, normalized),
                labels=labels.labels if labels is not None else None,
                threshold=thr,
                f1=float("nan"),
                predictions=preds,
            )
        )
    atomic_write_text(out, scores_csv_text(videos, with_labels=have_labels))
    print(f"wrote scores: {out}")
    return 0


def cmd_eval(args) -> int:
    model, manifest, config, pool_policy, pool_abs = _load_for_scoring(args)
    out_dir = Path(_require(args, "out_dir"))
    entry = evaluation.evaluate_model(
        model, manifest, config,
        pool_policy=pool_policy, pool_abs=pool_abs, strict=bool(args.strict_gt),
        init_seed=model.seed, train_seed=model.seed,
    )
    report = evaluation.AblationReport(
        entries=[entry],
        master_seed=int(model.seed),
        dataset_hash=evaluation.sha256_file(manifest.source_path),
        defaults={"strict_gt": bool(args.strict_gt), "checkpoint_modalities": config.name},
    )
    evaluation.emit_report(report, out_dir)
    preds = np.concatenate([v.predictions for v in entry.videos])
    labels = np.concatenate([v.labels for v in entry.videos])
    cm = evaluation.confusion(preds, labels)
    print(f"config {entry.name}: auc={entry.auc:.4f} best_f1={entry.best_f1:.4f}")
    print(f"confusion at per-video thresholds: tp={cm.tp} fp={cm.fp} tn={cm.tn} fn={cm.fn}")
    print(f"wrote report: {out_dir / 'summary.json'}")
    return 0


def cmd_ablate(args) -> int:
    manifest = load_manifest(_require(args, "manifest"), skip_incomplete=args.skip_incomplete)
    out_dir = Path(_require(args, "out_dir"))
    configs = _parse_configs(args.configs)
    template = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        seed=args.seed,
        shuffle=not args.no_shuffle,
    )
    preset = None if args.preset in (None, "auto") else args.preset
    if preset == "vision":
        preset = "vision_only"
    report = evaluation.run_ablation(
        manifest,
        configs,
        template,
        master_seed=args.seed,
        preset=preset,
        custom_widths=_parse_widths(args.widths),
        dropout_p=args.dropout,
        standardize=not args.no_standardize,
        pool_policy=args.pool_policy,
        pool_abs=args.pool_abs,
        strict=bool(args.strict_gt),
    )
    evaluation.emit_report(report, out_dir)
    for entry in report.entries:
        print(f"{entry.name}: auc={entry.auc:.4f} best_f1={entry.best_f1:.4f}")
    print(f"wrote report: {out_dir / 'summary.json'}")
    return 0


# ---------------------------------------------------------------------------
# parser

def _add_common_train_flags(p):
    p.add_argument("--seed", type=int, default=0, help="master seed for init/shuffle/dropout")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--preset", choices=["auto", "vision", "vision_only", "multimodal", "custom"],
                   default=None, help="network depth preset (default: per-config)")
    p.add_argument("--widths", default=None,
                   help="comma-separated encoder widths for --preset custom")
    p.add_argument("--no-shuffle", action="store_true")
    p.add_argument("--no-standardize", action="store_true",
                   help="feed raw fused vectors to the model (no z-scoring)")
    p.add_argument("--pool-policy", choices=["error", "forward-fill"], default="error")
    p.add_argument("--pool-abs", action="store_true",
                   help="max-pool sensor magnitudes instead of signed values")


def build_parser(file_defaults=None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hriad",
        description="Multimodal anomaly detection for human-robot interaction traces",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic multimodal dataset")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-train", type=int, default=55)
    p.add_argument("--n-test-normal", type=int, default=0)
    p.add_argument("--mix", default=None,
                   help="anomalous test episodes, e.g. drop_cup=7,torque_limit=5")
    p.add_argument("--anomaly-duration", type=int, default=2)
    p.add_argument("--clips-per-phase", type=int, default=2)
    p.add_argument("--feature-width", type=int, default=768)
    p.add_argument("--feature-noise", type=float, default=0.01)
    p.add_argument("--sensor-noise", type=float, default=0.05)
    p.add_argument("--sg-noise", type=float, default=0.02)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train an autoencoder on the train split")
    p.add_argument("--manifest")
    p.add_argument("--out", help="checkpoint path")
    p.add_argument("--modalities", default="vision",
                   help="vision | vision+sensor | vision+sg | all")
    p.add_argument("--skip-incomplete", action="store_true",
                   help="skip videos missing files for an enabled modality")
    _add_common_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a split with a trained checkpoint")
    p.add_argument("--manifest")
    p.add_argument("--checkpoint")
    p.add_argument("--out", help="score CSV path")
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--threshold-mode", choices=["f1", "percentile"], default="f1")
    p.add_argument("--q", type=float, default=99.0,
                   help="percentile of train errors for --threshold-mode percentile")
    p.add_argument("--strict-gt", action="store_true",
                   help="flag only scores strictly above the threshold")
    p.add_argument("--skip-incomplete", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="ROC/AUC report for a checkpoint on the test split")
    p.add_argument("--manifest")
    p.add_argument("--checkpoint")
    p.add_argument("--out-dir")
    p.add_argument("--strict-gt", action="store_true")
    p.add_argument("--skip-incomplete", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and compare modality configurations")
    p.add_argument("--manifest")
    p.add_argument("--out-dir")
    p.add_argument("--configs", default="vision,vision+sensor,vision+sg,all")
    p.add_argument("--strict-gt", action="store_true")
    p.add_argument("--skip-incomplete", action="store_true")
    _add_common_train_flags(p)
    p.set_defaults(func=cmd_ablate)

    for sp in sub.choices.values():
        sp.add_argument("--config", default=None, help="JSON file supplying flag defaults")
        if file_defaults:
            known = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in file_defaults.items() if k in known})
    return parser


def _file_defaults(argv):
    if "--config" not in argv:
        return None
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        return None  # let argparse report the missing value
    path = argv[idx + 1]
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise DataValidationError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"{path}: malformed config JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config file must hold a JSON object")
    return {str(k).replace("-", "_"): v for k, v in raw.items()}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser = build_parser(_file_defaults(argv))
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataValidationError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
