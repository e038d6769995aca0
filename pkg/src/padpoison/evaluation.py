"""Full attack cycles plus the ablation sweeps and the pruning defense curve.

A "cycle" is one poisoned-training run followed by benign/attack evaluation.
Sweeps share every seed except the swept variable, and reuse the clean
training features so only the re-poisoned clips are re-featurized.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .audio import TriggerSpec
from .classifier import SpeakerClassifier
from .corpus import Corpus, PoisonPlan, PoisonReport, build_poisoned_dataset, load_clip
from .features import FeatureConfig, extract_features
from .metrics import AttackMetrics, evaluate_attack, with_degradation
from .reports import ReportRow, emit_report


@dataclass
class CycleResult:
    """Trained model, its metrics, and (when poisoned) the poison report."""

    model: SpeakerClassifier
    metrics: AttackMetrics
    poison_report: "PoisonReport | None" = None


def corpus_features(corpus: Corpus, config: FeatureConfig):
    """Feature matrix and current labels for every sample, in corpus order."""
    X = np.stack([extract_features(load_clip(s), config) for s in corpus.samples])
    y = corpus.labels()
    return X, y


def _poisoned_features(train: Corpus, plan: PoisonPlan, config: FeatureConfig, clean_X=None):
    """Features of the poisoned corpus, re-extracting only the padded clips."""
    poisoned, report = build_poisoned_dataset(train, plan)
    if clean_X is None:
        X, y = corpus_features(poisoned, config)
        return X, y, report
    X = clean_X.copy()
    for idx in report.selected_indices:
        X[idx] = extract_features(load_clip(poisoned.samples[idx]), config)
    return X, poisoned.labels(), report


def train_clean_baseline(
    train: Corpus,
    eval_corpus: Corpus,
    trigger: TriggerSpec,
    target_label: int,
    feature_config: FeatureConfig,
    classifier_params: dict,
    clean_X=None,
) -> CycleResult:
    """Train on the untouched corpus; its ASR is the no-attack reference."""
    if clean_X is None:
        clean_X, y = corpus_features(train, feature_config)
    else:
        y = train.labels()
    model = SpeakerClassifier(**classifier_params)
    model.fit(clean_X, y, n_classes=train.num_speakers)
    metrics = evaluate_attack(model, eval_corpus, trigger, target_label, feature_config)
    return CycleResult(model=model, metrics=metrics)


def run_attack_cycle(
    train: Corpus,
    eval_corpus: Corpus,
    plan: PoisonPlan,
    feature_config: FeatureConfig,
    classifier_params: dict,
    clean_X=None,
) -> CycleResult:
    """Poison, train, and evaluate once."""
    X, y, report = _poisoned_features(train, plan, feature_config, clean_X)
    model = SpeakerClassifier(**classifier_params)
    model.fit(X, y, n_classes=train.num_speakers)
    metrics = evaluate_attack(model, eval_corpus, plan.trigger, plan.target_label, feature_config)
    return CycleResult(model=model, metrics=metrics, poison_report=report)


def sweep_poisoning_rate(
    train: Corpus,
    eval_corpus: Corpus,
    rates,
    trigger: TriggerSpec,
    target_label: int,
    poison_seed: int,
    feature_config: FeatureConfig,
    classifier_params: dict,
    csv_path=None,
    json_path=None,
    meta: dict | None = None,
):
    """One full cycle per poisoning rate, all other seeds shared.

    dacc/dasr are reported against the clean-trained baseline, so an
    effective attack shows a strongly negative dasr.
    """
    rates = [float(r) for r in rates]
    if not rates or any(not 0.0 < r < 100.0 for r in rates):
        raise ValueError("rates must be non-empty and each inside (0, 100)")
    clean_X, _ = corpus_features(train, feature_config)
    baseline = train_clean_baseline(
        train, eval_corpus, trigger, target_label, feature_config, classifier_params, clean_X
    )
    rows = []
    for rate in rates:
        plan = PoisonPlan(rate, target_label, trigger, poison_seed)
        cycle = run_attack_cycle(
            train, eval_corpus, plan, feature_config, classifier_params, clean_X
        )
        metrics = with_degradation(cycle.metrics, baseline.metrics)
        rows.append(
            ReportRow(
                condition="rate_sweep",
                rate=rate,
                trigger_len=trigger.length_samples,
                mode=trigger.mode.value,
                ba=metrics.ba,
                asr=metrics.asr,
                dacc=metrics.dacc,
                dasr=metrics.dasr,
            )
        )
    if csv_path is not None:
        emit_report(rows, csv_path, json_path, meta)
    return rows


def sweep_trigger_length(
    train: Corpus,
    eval_corpus: Corpus,
    lengths,
    rate_percent: float,
    mode,
    target_label: int,
    poison_seed: int,
    feature_config: FeatureConfig,
    classifier_params: dict,
    csv_path=None,
    json_path=None,
    meta: dict | None = None,
):
    """One full cycle per trigger length; poisoning and evaluation share it."""
    lengths = [int(v) for v in lengths]
    if not lengths or any(v < 1 for v in lengths):
        raise ValueError("lengths must be non-empty positive integers")
    clean_X, _ = corpus_features(train, feature_config)
    reference_trigger = TriggerSpec(mode, lengths[0])
    baseline = train_clean_baseline(
        train,
        eval_corpus,
        reference_trigger,
        target_label,
        feature_config,
        classifier_params,
        clean_X,
    )
    rows = []
    for length in lengths:
        trigger = TriggerSpec(mode, length)
        plan = PoisonPlan(rate_percent, target_label, trigger, poison_seed)
        cycle = run_attack_cycle(
            train, eval_corpus, plan, feature_config, classifier_params, clean_X
        )
        metrics = with_degradation(cycle.metrics, baseline.metrics)
        rows.append(
            ReportRow(
                condition="length_sweep",
                rate=rate_percent,
                trigger_len=length,
                mode=trigger.mode.value,
                ba=metrics.ba,
                asr=metrics.asr,
                dacc=metrics.dacc,
                dasr=metrics.dasr,
            )
        )
    if csv_path is not None:
        emit_report(rows, csv_path, json_path, meta)
    return rows


def pruning_curve(
    model: SpeakerClassifier,
    validation_X,
    ratios,
    eval_corpus: Corpus,
    trigger: TriggerSpec,
    target_label: int,
    feature_config: FeatureConfig,
    rate_percent=None,
    csv_path=None,
    json_path=None,
    meta: dict | None = None,
):
    """Metrics after sequentially pruning to each ratio (ascending).

    The caller's model is left untouched; the mask accumulates across the
    curve. dacc/dasr are reported against the unpruned model, so dasr grows
    as the defense removes the backdoor.
    """
    ratios = [float(r) for r in ratios]
    if not ratios:
        raise ValueError("ratios must be non-empty")
    if any(not 0.0 <= r < 1.0 for r in ratios):
        raise ValueError("each ratio must lie in [0, 1)")
    if any(b < a for a, b in zip(ratios, ratios[1:])):
        raise ValueError("ratios must be ascending")

    pruned = copy.deepcopy(model)
    reference = evaluate_attack(pruned, eval_corpus, trigger, target_label, feature_config)
    rows = []
    for ratio in ratios:
        pruned.prune_last_hidden(validation_X, ratio)
        metrics = evaluate_attack(pruned, eval_corpus, trigger, target_label, feature_config)
        metrics = with_degradation(metrics, reference)
        rows.append(
            ReportRow(
                condition=f"prune:{ratio:g}",
                rate=rate_percent,
                trigger_len=trigger.length_samples,
                mode=trigger.mode.value,
                ba=metrics.ba,
                asr=metrics.asr,
                dacc=metrics.dacc,
                dasr=metrics.dasr,
            )
        )
    if csv_path is not None:
        emit_report(rows, csv_path, json_path, meta)
    return rows
