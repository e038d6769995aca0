"""Padding-trigger backdoor poisoning experiments for speaker identification.

The package covers the full loop: trigger application on waveforms, a
synthetic speaker corpus, poisoned-set construction, a from-scratch MLP
victim, attack/benign metrics, ablation sweeps, and defense checks (last
hidden-layer pruning, energy-threshold VAD).
"""

from .audio import (
    AudioClip,
    PaddingMode,
    PaddingTrigger,
    TriggerSpec,
    WavFormatError,
    apply_trigger,
    blend_additive,
    read_wav,
    rms_energy,
    wrap_pad,
    write_wav,
    zero_pad,
)
from .classifier import (
    CheckpointError,
    SpeakerClassifier,
    TrainingDivergedError,
    cross_entropy,
    init_network,
    softmax,
)
from .corpus import (
    Corpus,
    LabeledSample,
    ManifestError,
    PoisonPlan,
    PoisonReport,
    SpeakerProfile,
    build_poisoned_dataset,
    generate_corpus,
    load_clip,
    poison_count,
    read_manifest,
    split_train_eval,
    write_manifest,
)
from .evaluation import (
    CycleResult,
    corpus_features,
    pruning_curve,
    run_attack_cycle,
    sweep_poisoning_rate,
    sweep_trigger_length,
    train_clean_baseline,
)
from .experiment import ConfigError, ExperimentConfig, substream_seed
from .features import (
    FeatureConfig,
    MelFeatureExtractor,
    extract_features,
    fft_radix2,
    frame_and_window,
    hann_window,
    hz_to_mel,
    log_mel_frames,
    mel_filterbank,
    mel_to_hz,
    power_spectrum,
)
from .metrics import (
    AttackMetrics,
    MetricsError,
    attack_success_rate,
    benign_accuracy,
    degradation_metrics,
    evaluate_attack,
    with_degradation,
)
from .reports import CSV_HEADER, ReportRow, emit_report, write_report_csv, write_summary_json
from .vad import VadReport, active_frames, segments_from_flags, vad_check

__version__ = "0.1.0"
