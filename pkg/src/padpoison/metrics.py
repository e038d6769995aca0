"""Attack and benign evaluation metrics computed as exact integer-count ratios."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .audio import TriggerSpec, apply_trigger
from .corpus import Corpus, load_clip
from .features import FeatureConfig, extract_features


class MetricsError(ValueError):
    """Metric precondition failed (poisoned eval data, mismatched corpora, ...)."""


@dataclass(frozen=True)
class AttackMetrics:
    """Benign accuracy, attack success rate, and their degradations.

    `ba` and `asr` are exact ratios of integer counts over `n_eval_clean` and
    `n_eval_triggered` samples. `dacc`/`dasr` are filled in relative to a
    caller-chosen reference via `degradation_metrics`.
    """

    ba: float
    asr: float
    dacc: float
    dasr: float
    n_eval_clean: int
    n_eval_triggered: int
    eval_fingerprint: str = ""


def _require_clean(corpus: Corpus):
    if any(s.poisoned for s in corpus.samples):
        raise MetricsError("eval corpus contains poisoned samples")


def _eval_features(corpus: Corpus, config: FeatureConfig) -> np.ndarray:
    return np.stack([extract_features(load_clip(s), config) for s in corpus.samples])


def benign_accuracy(model, eval_corpus: Corpus, feature_config: FeatureConfig) -> float:
    """Fraction of clean eval samples classified as their true speaker."""
    _require_clean(eval_corpus)
    X = _eval_features(eval_corpus, feature_config)
    predictions = model.predict(X)
    truth = np.array([s.original_label for s in eval_corpus.samples])
    return float(np.sum(predictions == truth)) / len(eval_corpus)


def attack_success_rate(
    model,
    eval_corpus: Corpus,
    trigger: TriggerSpec,
    target_label: int,
    feature_config: FeatureConfig,
) -> float:
    """Fraction of triggered non-target eval samples classified as the target.

    Samples whose true speaker already is the target label are excluded from
    both numerator and denominator.
    """
    _require_clean(eval_corpus)
    qualifying = [s for s in eval_corpus.samples if s.original_label != target_label]
    if not qualifying:
        raise MetricsError(
            f"no eval samples with original_label != {target_label}"
        )
    X = np.stack(
        [
            extract_features(apply_trigger(load_clip(s), trigger), feature_config)
            for s in qualifying
        ]
    )
    predictions = model.predict(X)
    return float(np.sum(predictions == target_label)) / len(qualifying)


def evaluate_attack(
    model,
    eval_corpus: Corpus,
    trigger: TriggerSpec,
    target_label: int,
    feature_config: FeatureConfig,
) -> AttackMetrics:
    """BA plus ASR on one eval corpus; degradations start at zero."""
    ba = benign_accuracy(model, eval_corpus, feature_config)
    asr = attack_success_rate(model, eval_corpus, trigger, target_label, feature_config)
    n_triggered = sum(1 for s in eval_corpus.samples if s.original_label != target_label)
    return AttackMetrics(
        ba=ba,
        asr=asr,
        dacc=0.0,
        dasr=0.0,
        n_eval_clean=len(eval_corpus),
        n_eval_triggered=n_triggered,
        eval_fingerprint=eval_corpus.fingerprint(),
    )


def degradation_metrics(reference: AttackMetrics, current: AttackMetrics):
    """(dacc, dasr) = (reference.ba - current.ba, reference.asr - current.asr).

    For attack rows the natural reference is the no-attack baseline (large
    negative dasr means an effective attack); for defense curves it is the
    undefended attack model (positive dasr means the defense bites). Both
    metrics must come from the same eval corpus.
    """
    if (
        reference.eval_fingerprint
        and current.eval_fingerprint
        and reference.eval_fingerprint != current.eval_fingerprint
    ):
        raise MetricsError("metrics were computed on different eval corpora")
    return reference.ba - current.ba, reference.asr - current.asr


def with_degradation(metrics: AttackMetrics, reference: AttackMetrics) -> AttackMetrics:
    """Copy of `metrics` with dacc/dasr filled in against `reference`."""
    dacc, dasr = degradation_metrics(reference, metrics)
    return replace(metrics, dacc=dacc, dasr=dasr)
