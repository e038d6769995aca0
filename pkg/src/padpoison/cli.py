"""Command-line pipeline: gen-data, poison, train, eval, sweep, prune, vad-check.

All subcommands are driven by a JSON config file plus flag overrides (flags
win). Outputs land in a fixed layout under the output directory:
data/, manifests/, checkpoints/, reports/. Exit codes: 0 success,
1 validation error, 2 runtime/numeric error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .audio import read_wav, write_wav
from .classifier import SpeakerClassifier, TrainingDivergedError
from .corpus import (
    LabeledSample,
    build_poisoned_dataset,
    generate_corpus,
    load_clip,
    read_manifest,
    split_train_eval,
    write_manifest,
)
from .evaluation import (
    corpus_features,
    pruning_curve,
    sweep_poisoning_rate,
    sweep_trigger_length,
)
from .experiment import ConfigError, ExperimentConfig
from .metrics import evaluate_attack
from .reports import ReportRow, atomic_write_text, emit_report, write_summary_json
from .vad import vad_check

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

SUBDIRS = ("data", "manifests", "checkpoints", "reports")


def _load_config(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        config = ExperimentConfig.load(args.config)
    else:
        config = ExperimentConfig.from_dict({})
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "out", None):
        config.output_dir = args.out
    if getattr(args, "mode", None):
        config.poison.mode = args.mode
    if getattr(args, "rate", None) is not None:
        config.poison.rate_percent = args.rate
    if getattr(args, "trigger_len", None) is not None:
        config.poison.trigger_len = args.trigger_len
    if getattr(args, "target_label", None) is not None:
        config.poison.target_label = args.target_label
    # Re-validate after overrides so bad flags fail the same way bad files do.
    return ExperimentConfig.from_dict(config.to_dict())


def _layout(config: ExperimentConfig) -> dict:
    out = Path(config.output_dir)
    return {name: out / name for name in SUBDIRS} | {"root": out}


def _ensure_layout(config: ExperimentConfig) -> dict:
    paths = _layout(config)
    for name in SUBDIRS:
        paths[name].mkdir(parents=True, exist_ok=True)
    return paths


def _manifest_path(paths: dict, value: str) -> Path:
    candidate = Path(value)
    return candidate if candidate.is_absolute() else paths["manifests"] / candidate


def cmd_gen_data(args) -> int:
    config = _load_config(args)
    paths = _layout(config)
    clean_dir = paths["data"] / "clean"
    if clean_dir.exists() and any(clean_dir.iterdir()) and not args.force:
        raise ConfigError(f"{clean_dir} is not empty; pass --force to overwrite")
    _ensure_layout(config)
    clean_dir.mkdir(parents=True, exist_ok=True)

    corpus = generate_corpus(
        num_speakers=config.corpus.num_speakers,
        utterances_per_speaker=config.corpus.utterances_per_speaker,
        duration_range_s=config.corpus.duration_range_s,
        sample_rate=config.corpus.sample_rate,
        seed=config.corpus_seed(),
    )
    counters = {}
    disk_samples = []
    for sample in corpus.samples:
        utt = counters.get(sample.label, 0)
        counters[sample.label] = utt + 1
        wav_path = clean_dir / f"s{sample.label:03d}_u{utt:04d}.wav"
        write_wav(wav_path, sample.clip_ref)
        rel = Path("..") / "data" / "clean" / wav_path.name
        disk_samples.append(
            LabeledSample(
                rel,
                label=sample.label,
                original_label=sample.original_label,
                num_samples=sample.num_samples,
            )
        )
    disk_corpus = type(corpus)(disk_samples, corpus.num_speakers, corpus.sample_rate)
    write_manifest(disk_corpus, paths["manifests"] / "full.jsonl")

    train, evaluation = split_train_eval(
        disk_corpus, config.split.train_fraction, config.split_seed()
    )
    write_manifest(train, paths["manifests"] / "train.jsonl")
    write_manifest(evaluation, paths["manifests"] / "eval.jsonl")
    print(
        f"wrote {len(corpus)} clips ({len(train)} train / {len(evaluation)} eval) "
        f"to {paths['root']}"
    )
    return EXIT_OK


def cmd_poison(args) -> int:
    config = _load_config(args)
    paths = _ensure_layout(config)
    manifest = _manifest_path(paths, args.manifest)
    train = read_manifest(
        manifest, config.corpus.num_speakers, config.corpus.sample_rate
    )
    plan = config.poison_plan()
    poisoned, report = build_poisoned_dataset(train, plan)

    poison_dir = paths["data"] / "poisoned"
    poison_dir.mkdir(parents=True, exist_ok=True)
    disk_samples = []
    for idx, sample in enumerate(poisoned.samples):
        if sample.poisoned:
            wav_path = poison_dir / f"p{idx:05d}.wav"
            write_wav(wav_path, sample.clip_ref)
            disk_samples.append(
                LabeledSample(
                    Path("..") / "data" / "poisoned" / wav_path.name,
                    label=sample.label,
                    original_label=sample.original_label,
                    poisoned=True,
                    num_samples=sample.num_samples,
                )
            )
        else:
            disk_samples.append(train.samples[idx])
    disk_corpus = type(poisoned)(disk_samples, poisoned.num_speakers, poisoned.sample_rate)
    out_manifest = paths["manifests"] / "train_poisoned.jsonl"
    write_manifest(disk_corpus, out_manifest)
    write_summary_json(report.to_dict(), paths["reports"] / "poison_report.json")
    print(
        f"poisoned {len(report.selected_indices)} of {len(train)} samples "
        f"({plan.trigger.mode.value}, {plan.trigger.length_samples} samples) -> {out_manifest}"
    )
    return EXIT_OK


def cmd_train(args) -> int:
    config = _load_config(args)
    paths = _ensure_layout(config)
    manifest = _manifest_path(paths, args.manifest)
    corpus = read_manifest(
        manifest, config.corpus.num_speakers, config.corpus.sample_rate
    )
    feature_config = config.feature_config()
    X, y = corpus_features(corpus, feature_config)
    model = SpeakerClassifier(**config.classifier_params())
    model.fit(X, y, n_classes=corpus.num_speakers)

    checkpoint = paths["checkpoints"] / args.checkpoint
    model.save(checkpoint, feature_fingerprint=feature_config.fingerprint())
    trace_lines = ["epoch,loss,accuracy"]
    trace_lines += [
        f"{i},{loss:.10f},{acc:.6f}"
        for i, (loss, acc) in enumerate(zip(model.loss_trace_, model.accuracy_trace_))
    ]
    atomic_write_text(paths["reports"] / "train_trace.csv", "\n".join(trace_lines) + "\n")
    print(
        f"trained on {len(corpus)} samples for {config.train.epochs} epochs; "
        f"final loss {model.loss_trace_[-1]:.4f}, accuracy {model.accuracy_trace_[-1]:.4f} "
        f"-> {checkpoint}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _load_config(args)
    paths = _ensure_layout(config)
    model = SpeakerClassifier.load(paths["checkpoints"] / args.checkpoint)
    feature_config = config.feature_config()
    if getattr(model, "feature_fingerprint_", ""):
        if model.feature_fingerprint_ != feature_config.fingerprint():
            raise ConfigError(
                "checkpoint feature fingerprint does not match the current config"
            )
    eval_corpus = read_manifest(
        _manifest_path(paths, args.manifest),
        config.corpus.num_speakers,
        config.corpus.sample_rate,
    )
    metrics = evaluate_attack(
        model,
        eval_corpus,
        config.trigger_spec(),
        config.poison.target_label,
        feature_config,
    )
    if args.reference:
        from .metrics import AttackMetrics, with_degradation

        ref_payload = json.loads(Path(args.reference).read_text(encoding="utf-8"))
        reference = AttackMetrics(**ref_payload["metrics"])
        metrics = with_degradation(metrics, reference)

    row = ReportRow(
        condition=args.condition,
        rate=config.poison.rate_percent,
        trigger_len=config.poison.trigger_len,
        mode=config.poison.mode,
        ba=metrics.ba,
        asr=metrics.asr,
        dacc=metrics.dacc,
        dasr=metrics.dasr,
    )
    payload = {
        "condition": args.condition,
        "metrics": {
            "ba": metrics.ba,
            "asr": metrics.asr,
            "dacc": metrics.dacc,
            "dasr": metrics.dasr,
            "n_eval_clean": metrics.n_eval_clean,
            "n_eval_triggered": metrics.n_eval_triggered,
            "eval_fingerprint": metrics.eval_fingerprint,
        },
        "seed": config.seed,
        "feature_fingerprint": feature_config.fingerprint(),
    }
    emit_report([row], paths["reports"] / "eval_metrics.csv")
    write_summary_json(payload, paths["reports"] / "eval_metrics.json")
    print(f"ba={metrics.ba:.4f} asr={metrics.asr:.4f} on {len(eval_corpus)} eval samples")
    return EXIT_OK


def _in_memory_corpora(config: ExperimentConfig):
    corpus = generate_corpus(
        num_speakers=config.corpus.num_speakers,
        utterances_per_speaker=config.corpus.utterances_per_speaker,
        duration_range_s=config.corpus.duration_range_s,
        sample_rate=config.corpus.sample_rate,
        seed=config.corpus_seed(),
    )
    return split_train_eval(corpus, config.split.train_fraction, config.split_seed())


def cmd_sweep(args) -> int:
    config = _load_config(args)
    paths = _ensure_layout(config)
    values = [v for v in args.values.split(",") if v]
    if not values:
        raise ConfigError("--values must list at least one value")
    train, evaluation = _in_memory_corpora(config)
    feature_config = config.feature_config()
    meta = {
        "seed": config.seed,
        "axis": args.axis,
        "feature_fingerprint": feature_config.fingerprint(),
        "train_fingerprint": train.fingerprint(),
        "eval_fingerprint": evaluation.fingerprint(),
    }
    plan = config.poison_plan()
    if args.axis == "rate":
        rows = sweep_poisoning_rate(
            train,
            evaluation,
            [float(v) for v in values],
            plan.trigger,
            plan.target_label,
            plan.seed,
            feature_config,
            config.classifier_params(),
            csv_path=paths["reports"] / "sweep_rate.csv",
            json_path=paths["reports"] / "sweep_rate.json",
            meta=meta,
        )
    else:
        rows = sweep_trigger_length(
            train,
            evaluation,
            [int(v) for v in values],
            plan.rate_percent,
            plan.trigger.mode,
            plan.target_label,
            plan.seed,
            feature_config,
            config.classifier_params(),
            csv_path=paths["reports"] / "sweep_length.csv",
            json_path=paths["reports"] / "sweep_length.json",
            meta=meta,
        )
    for row in rows:
        print(",".join(row.csv_cells()))
    return EXIT_OK


def cmd_prune(args) -> int:
    config = _load_config(args)
    paths = _ensure_layout(config)
    model = SpeakerClassifier.load(paths["checkpoints"] / args.checkpoint)
    feature_config = config.feature_config()
    eval_corpus = read_manifest(
        _manifest_path(paths, args.manifest),
        config.corpus.num_speakers,
        config.corpus.sample_rate,
    )
    validation = read_manifest(
        _manifest_path(paths, args.validation_manifest),
        config.corpus.num_speakers,
        config.corpus.sample_rate,
    )
    validation_X, _ = corpus_features(validation, feature_config)
    ratios = [float(v) for v in args.ratios.split(",") if v]
    rows = pruning_curve(
        model,
        validation_X,
        ratios,
        eval_corpus,
        config.trigger_spec(),
        config.poison.target_label,
        feature_config,
        rate_percent=config.poison.rate_percent,
        csv_path=paths["reports"] / "prune_curve.csv",
        json_path=paths["reports"] / "prune_curve.json",
        meta={"seed": config.seed, "ratios": ratios},
    )
    for row in rows:
        print(",".join(row.csv_cells()))
    return EXIT_OK


def cmd_vad_check(args) -> int:
    config = _load_config(args)
    paths = _ensure_layout(config)
    clean = read_wav(args.clean)
    poisoned = read_wav(args.poisoned)
    report = vad_check(
        clean,
        poisoned,
        threshold=args.threshold,
        frame_len=args.frame_len,
        hop=args.hop,
    )
    payload = {
        "clean_segments": [list(seg) for seg in report.clean_segments],
        "poisoned_segments": [list(seg) for seg in report.poisoned_segments],
        "boundary_shift_frames": report.boundary_shift_frames,
        "triggered_region_active": report.triggered_region_active,
        "threshold": report.threshold,
        "frame_len": report.frame_len,
        "hop": report.hop,
    }
    write_summary_json(payload, paths["reports"] / "vad_check.json")
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="padpoison",
        description="Padding-trigger backdoor experiments on speaker identification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON experiment config file")
        p.add_argument("--seed", type=int, help="root seed override")
        p.add_argument("--out", help="output directory override")
        p.add_argument("--mode", choices=("zero", "wrap"), help="padding mode override")
        p.add_argument("--rate", type=float, help="poisoning rate (percent) override")
        p.add_argument("--trigger-len", type=int, help="trigger length override (samples)")
        p.add_argument("--target-label", type=int, help="target label override")

    p = sub.add_parser("gen-data", help="synthesize the corpus, write WAVs + manifests")
    add_common(p)
    p.add_argument("--force", action="store_true", help="overwrite existing data")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("poison", help="build the poisoned training manifest")
    add_common(p)
    p.add_argument("--manifest", default="train.jsonl", help="training manifest to poison")
    p.set_defaults(func=cmd_poison)

    p = sub.add_parser("train", help="train the classifier from a manifest")
    add_common(p)
    p.add_argument("--manifest", default="train_poisoned.jsonl", help="training manifest")
    p.add_argument("--checkpoint", default="model.json", help="checkpoint filename")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="benign accuracy + attack success rate")
    add_common(p)
    p.add_argument("--checkpoint", default="model.json", help="checkpoint filename")
    p.add_argument("--manifest", default="eval.jsonl", help="clean eval manifest")
    p.add_argument("--condition", default="attack", help="condition label for report rows")
    p.add_argument("--reference", help="eval_metrics.json to compute degradations against")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="poisoning-rate or trigger-length ablation")
    add_common(p)
    p.add_argument("--axis", choices=("rate", "length"), required=True)
    p.add_argument("--values", required=True, help="comma-separated sweep values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("prune", help="last-hidden-layer pruning defense curve")
    add_common(p)
    p.add_argument("--checkpoint", default="model.json", help="checkpoint filename")
    p.add_argument("--manifest", default="eval.jsonl", help="clean eval manifest")
    p.add_argument(
        "--validation-manifest",
        default="eval.jsonl",
        help="clean manifest used to rank neuron activations",
    )
    p.add_argument(
        "--ratios",
        default="0,0.25,0.5,0.75,0.9,0.95",
        help="comma-separated ascending pruning ratios in [0, 1)",
    )
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("vad-check", help="compare VAD segments of clean vs padded WAV")
    add_common(p)
    p.add_argument("--clean", required=True, help="clean WAV path")
    p.add_argument("--poisoned", required=True, help="padded WAV path")
    p.add_argument("--threshold", type=float, default=1e-3, help="RMS energy threshold")
    p.add_argument("--frame-len", type=int, default=400, dest="frame_len")
    p.add_argument("--hop", type=int, default=160)
    p.set_defaults(func=cmd_vad_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TrainingDivergedError as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
