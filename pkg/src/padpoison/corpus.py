"""Synthetic speaker corpora, stratified splits, and poisoned-set construction.

The generator renders each utterance as a pitch-glided sawtooth source shaped
by three formant resonators, with a plosive-like onset burst, a syllabic
amplitude envelope, a fade-out, and a trailing digital-silence pause. Every
utterance derives its own RNG stream from (seed, speaker, index), so corpora
are reproducible sample-for-sample.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.signal

from .audio import AudioClip, TriggerSpec, apply_trigger, read_wav
from .validation import check_positive_int


class ManifestError(ValueError):
    """A corpus manifest is missing, malformed, or inconsistent."""


# Synthesis constants. The trailing pause is digital silence, scales with
# utterance length, and must stay >= 64 ms so that energy-threshold VAD
# frames never straddle speech into an appended trigger region. The voiced
# source is low-passed below the onset-burst band so plosive onsets occupy
# bands where voiced frames sit at the noise floor.
BURST_MS = 30.0
BURST_EDGE_MS = 2.0
FADE_MS = 40.0
TAIL_FRACTION = 0.07
TAIL_MIN_MS = 64.0
NOISE_LEVEL = 0.002
FORMANT_BANDWIDTHS = (90.0, 120.0, 160.0)
FORMANT_GAINS = (1.0, 0.7, 0.45)
SOURCE_LOWPASS_HZ = 4200.0
BURST_CENTER_HZ = (6300.0, 6700.0)


@dataclass(frozen=True)
class SpeakerProfile:
    """Per-speaker voice parameters drawn deterministically from a seed."""

    fundamental_hz: float
    formant_hzs: tuple
    jitter: float
    seed: int

    def __post_init__(self):
        if not 90.0 <= self.fundamental_hz <= 300.0:
            raise ValueError(f"fundamental_hz out of range: {self.fundamental_hz}")
        if len(self.formant_hzs) != 3:
            raise ValueError("expected exactly three formants")
        if any(not 300.0 <= f <= 3500.0 for f in self.formant_hzs):
            raise ValueError(f"formants out of range: {self.formant_hzs}")
        if not all(a < b for a, b in zip(self.formant_hzs, self.formant_hzs[1:])):
            raise ValueError("formants must be strictly increasing")
        if self.jitter < 0:
            raise ValueError("jitter must be >= 0")


@dataclass
class LabeledSample:
    """One utterance: a clip (in memory or on disk) plus label bookkeeping."""

    clip_ref: "AudioClip | Path"
    label: int
    original_label: int
    poisoned: bool = False
    num_samples: int = 0

    def __post_init__(self):
        if isinstance(self.clip_ref, AudioClip):
            self.num_samples = len(self.clip_ref)
        elif self.num_samples < 1:
            raise ValueError("path-referenced samples need a positive num_samples")
        if self.label < 0 or self.original_label < 0:
            raise ValueError("labels must be non-negative")
        if not self.poisoned and self.label != self.original_label:
            raise ValueError("clean samples must keep their original label")


def load_clip(sample: LabeledSample) -> AudioClip:
    """Return the sample's clip, reading it from disk when path-referenced."""
    if isinstance(sample.clip_ref, AudioClip):
        return sample.clip_ref
    return read_wav(sample.clip_ref)


@dataclass
class Corpus:
    """Labeled utterances for a fixed set of enrolled speakers."""

    samples: list
    num_speakers: int
    sample_rate: int

    def __post_init__(self):
        if self.num_speakers < 2:
            raise ValueError("a corpus needs at least 2 speakers")
        if not self.samples:
            raise ValueError("a corpus must contain at least one sample")
        for i, s in enumerate(self.samples):
            if s.label >= self.num_speakers or s.original_label >= self.num_speakers:
                raise ValueError(
                    f"sample {i} has label outside [0, {self.num_speakers})"
                )

    def __len__(self) -> int:
        return len(self.samples)

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def fingerprint(self) -> str:
        """Metadata digest used to detect metric computations on mismatched sets."""
        meta = [self.num_speakers, self.sample_rate] + [
            [s.label, s.original_label, bool(s.poisoned), int(s.num_samples)]
            for s in self.samples
        ]
        return hashlib.sha256(json.dumps(meta).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class PoisonPlan:
    """Recipe for converting part of a training corpus into poisoned samples."""

    rate_percent: float
    target_label: int
    trigger: TriggerSpec
    seed: int
    exclude_target: bool = False

    def __post_init__(self):
        if not 0.0 < self.rate_percent < 100.0:
            raise ValueError(f"rate_percent must lie in (0, 100), got {self.rate_percent}")
        if self.target_label < 0:
            raise ValueError("target_label must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if not isinstance(self.trigger, TriggerSpec):
            raise ValueError("trigger must be a TriggerSpec")


@dataclass
class PoisonReport:
    """What the poisoning step actually did, for reproducibility audits."""

    selected_indices: list
    per_class_counts: dict
    rate_percent: float
    target_label: int
    trigger_mode: str
    trigger_length: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "selected_indices": list(self.selected_indices),
            "per_class_counts": {str(k): v for k, v in sorted(self.per_class_counts.items())},
            "rate_percent": self.rate_percent,
            "target_label": self.target_label,
            "trigger_mode": self.trigger_mode,
            "trigger_length": self.trigger_length,
            "seed": self.seed,
        }


def _resonate(signal: np.ndarray, freq_hz: float, bandwidth_hz: float, sample_rate: int) -> np.ndarray:
    r = math.exp(-math.pi * bandwidth_hz / sample_rate)
    theta = 2.0 * math.pi * freq_hz / sample_rate
    b = [1.0 - r]
    a = [1.0, -2.0 * r * math.cos(theta), r * r]
    return scipy.signal.lfilter(b, a, signal)


def draw_speaker_profile(seed: int, speaker_index: int) -> SpeakerProfile:
    """Deterministic voice parameters for one speaker."""
    seq = np.random.SeedSequence([seed, speaker_index])
    rng = np.random.default_rng(seq)
    fundamental = rng.uniform(95.0, 280.0)
    formants = (
        rng.uniform(350.0, 850.0),
        rng.uniform(950.0, 2100.0),
        rng.uniform(2300.0, 3400.0),
    )
    jitter = rng.uniform(0.002, 0.02)
    child_seed = int(seq.generate_state(1, dtype=np.uint64)[0])
    return SpeakerProfile(fundamental, formants, jitter, child_seed)


def synthesize_utterance(
    profile: SpeakerProfile,
    duration_s: float,
    sample_rate: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Render one utterance; peak-normalized to 0.9 before the silent tail."""
    n_total = int(round(duration_s * sample_rate))
    tail = max(
        int(round(TAIL_FRACTION * n_total)),
        int(round(TAIL_MIN_MS / 1000.0 * sample_rate)),
    )
    fade = int(round(FADE_MS / 1000.0 * sample_rate))
    burst_len = int(round(BURST_MS / 1000.0 * sample_rate))
    n_voiced = n_total - tail
    if n_voiced < 2 * max(burst_len, fade):
        raise ValueError(f"duration {duration_s:.3f}s is too short to synthesize")

    t = np.arange(n_voiced) / sample_rate
    fundamental = profile.fundamental_hz * (1.0 + profile.jitter * rng.standard_normal())
    # Downward pitch declination makes utterance starts spectrally distinct
    # from utterance ends, which wrap padding then reintroduces at the end.
    glide = np.linspace(1.06, 0.94, n_voiced)
    phase = np.cumsum(fundamental * glide) / sample_rate
    source = 2.0 * (phase % 1.0) - 1.0
    sos = scipy.signal.butter(
        6, SOURCE_LOWPASS_HZ / (sample_rate / 2), btype="low", output="sos"
    )
    source = scipy.signal.sosfilt(sos, source)

    voiced = np.zeros(n_voiced)
    for freq, bandwidth, gain in zip(profile.formant_hzs, FORMANT_BANDWIDTHS, FORMANT_GAINS):
        voiced += gain * _resonate(source, freq, bandwidth, sample_rate)

    syllable_rate = rng.uniform(2.5, 4.5)
    syllable_phase = rng.uniform(0.0, 2.0 * math.pi)
    envelope = (1.0 + 0.3 * np.sin(2.0 * math.pi * syllable_rate * t + syllable_phase))
    envelope *= np.linspace(1.0, 0.6, n_voiced)
    envelope[-fade:] *= np.linspace(1.0, 0.0, fade)

    # Breath noise shares the source lowpass, keeping the burst band quiet
    # during voiced frames.
    noise = scipy.signal.sosfilt(sos, rng.standard_normal(n_voiced)) * NOISE_LEVEL
    signal = (voiced + noise) * envelope

    # Plosive-like onset: differenced white noise (high-frequency tilt)
    # resonated well above the third formant and held at full level for the
    # whole burst, so onsets are loud in bands voiced frames never reach.
    burst_noise = np.diff(rng.standard_normal(burst_len), prepend=0.0)
    lo, hi = BURST_CENTER_HZ
    burst_center = rng.uniform(lo, min(hi, 0.45 * sample_rate))
    burst = _resonate(burst_noise, burst_center, 1200.0, sample_rate)
    edge = max(1, int(round(BURST_EDGE_MS / 1000.0 * sample_rate)))
    taper = np.ones(burst_len)
    ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(edge) / edge)
    taper[:edge] = ramp
    taper[-edge:] = ramp[::-1]
    burst *= taper
    peak_voiced = np.max(np.abs(signal))
    rms_burst = np.sqrt(np.mean(burst**2))
    if rms_burst > 0:
        signal[:burst_len] += burst * (0.45 * peak_voiced / rms_burst)

    signal *= 0.9 / np.max(np.abs(signal))
    return np.concatenate([signal, np.zeros(tail)])


def generate_corpus(
    num_speakers: int,
    utterances_per_speaker: int,
    duration_range_s=(0.9, 1.3),
    sample_rate: int = 16000,
    seed: int = 0,
) -> Corpus:
    """Deterministic synthetic corpus of labeled utterances."""
    if num_speakers < 2:
        raise ValueError("num_speakers must be >= 2")
    check_positive_int(utterances_per_speaker, "utterances_per_speaker")
    lo, hi = float(duration_range_s[0]), float(duration_range_s[1])
    if not (0.5 <= lo <= hi <= 5.0):
        raise ValueError(f"duration range must satisfy 0.5 <= lo <= hi <= 5.0, got {duration_range_s}")
    if sample_rate < 8000:
        raise ValueError("sample_rate must be >= 8000 for formant synthesis")
    if seed < 0:
        raise ValueError("seed must be non-negative")

    samples = []
    for speaker in range(num_speakers):
        profile = draw_speaker_profile(seed, speaker)
        for utt in range(utterances_per_speaker):
            rng = np.random.default_rng(np.random.SeedSequence([seed, speaker, utt]))
            duration = rng.uniform(lo, hi)
            waveform = synthesize_utterance(profile, duration, sample_rate, rng)
            clip = AudioClip(waveform, sample_rate)
            samples.append(LabeledSample(clip, label=speaker, original_label=speaker))
    return Corpus(samples, num_speakers, sample_rate)


def split_train_eval(corpus: Corpus, train_fraction: float, seed: int):
    """Stratified per-speaker split; exactly ceil(fraction * n) to train."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    by_speaker = {label: [] for label in range(corpus.num_speakers)}
    for idx, sample in enumerate(corpus.samples):
        by_speaker[sample.label].append(idx)

    rng = np.random.default_rng(seed)
    train_samples, eval_samples = [], []
    for label in range(corpus.num_speakers):
        indices = by_speaker[label]
        if len(indices) < 2:
            raise ValueError(
                f"speaker {label} has {len(indices)} utterance(s); need >= 2 to stratify"
            )
        order = rng.permutation(len(indices))
        n_train = math.ceil(train_fraction * len(indices))
        if n_train >= len(indices):
            raise ValueError(
                f"train_fraction {train_fraction} leaves no eval samples for speaker {label}"
            )
        for pos in order[:n_train]:
            train_samples.append(corpus.samples[indices[pos]])
        for pos in order[n_train:]:
            eval_samples.append(corpus.samples[indices[pos]])
    return (
        Corpus(train_samples, corpus.num_speakers, corpus.sample_rate),
        Corpus(eval_samples, corpus.num_speakers, corpus.sample_rate),
    )


def poison_count(rate_percent: float, n: int) -> int:
    """Half-up rounded count of samples to poison; zero is an error."""
    if not 0.0 < rate_percent < 100.0:
        raise ValueError(f"rate_percent must lie in (0, 100), got {rate_percent}")
    k = int(math.floor(rate_percent / 100.0 * n + 0.5))
    if k == 0:
        raise ValueError(
            f"poisoning rate {rate_percent}% of {n} samples selects zero items"
        )
    return k


def build_poisoned_dataset(train: Corpus, plan: PoisonPlan):
    """Replace a seeded random selection of samples by triggered ones.

    Selected clips get the padding trigger appended and their label changed
    to the plan's target; everything else is passed through untouched, so the
    output corpus has the same size and ordering as the input.
    """
    if plan.target_label >= train.num_speakers:
        raise ValueError(
            f"target_label {plan.target_label} >= num_speakers {train.num_speakers}"
        )
    pool = [
        i
        for i, s in enumerate(train.samples)
        if not (plan.exclude_target and s.original_label == plan.target_label)
    ]
    k = poison_count(plan.rate_percent, len(train))
    if k > len(pool):
        raise ValueError(
            f"cannot poison {k} samples; only {len(pool)} are eligible"
        )
    rng = np.random.default_rng(plan.seed)
    chosen = np.sort(rng.choice(len(pool), size=k, replace=False))
    selected = [pool[i] for i in chosen]
    selected_set = set(selected)

    new_samples = []
    per_class = {}
    for idx, sample in enumerate(train.samples):
        if idx in selected_set:
            padded = apply_trigger(load_clip(sample), plan.trigger)
            new_samples.append(
                LabeledSample(
                    padded,
                    label=plan.target_label,
                    original_label=sample.original_label,
                    poisoned=True,
                )
            )
            per_class[sample.original_label] = per_class.get(sample.original_label, 0) + 1
        else:
            new_samples.append(sample)
    report = PoisonReport(
        selected_indices=selected,
        per_class_counts=per_class,
        rate_percent=plan.rate_percent,
        target_label=plan.target_label,
        trigger_mode=plan.trigger.mode.value,
        trigger_length=plan.trigger.length_samples,
        seed=plan.seed,
    )
    return Corpus(new_samples, train.num_speakers, train.sample_rate), report


def write_manifest(corpus: Corpus, path) -> None:
    """One JSON record per line; clips must already live on disk as WAVs.

    WAV paths are stored relative to the manifest's directory, so a whole
    output tree can be moved (or two trees compared byte-for-byte) without
    touching the manifests.
    """
    path = Path(path)
    lines = []
    for i, sample in enumerate(corpus.samples):
        if isinstance(sample.clip_ref, AudioClip):
            raise ManifestError(
                f"sample {i} is in-memory only; write its WAV before the manifest"
            )
        ref = Path(sample.clip_ref)
        if ref.is_absolute():
            ref = Path(os.path.relpath(ref, path.parent.resolve()))
        record = {
            "path": ref.as_posix(),
            "label": int(sample.label),
            "original_label": int(sample.original_label),
            "poisoned": bool(sample.poisoned),
            "num_samples": int(sample.num_samples),
        }
        lines.append(json.dumps(record, sort_keys=True))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path, num_speakers: int | None = None, sample_rate: int = 16000) -> Corpus:
    """Load a manifest back into a path-referenced corpus.

    Paths are resolved relative to the manifest's own directory. When
    `num_speakers` is omitted it is inferred from the largest label present.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"{path}: no such manifest")
    base = path.parent
    samples = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: malformed JSON ({exc})") from exc
        missing = {"path", "label", "original_label", "poisoned", "num_samples"} - set(record)
        if missing:
            raise ManifestError(f"{path}:{lineno}: missing keys {sorted(missing)}")
        wav_path = (base / record["path"]).resolve()
        if not wav_path.is_file():
            raise ManifestError(f"{path}:{lineno}: missing WAV {record['path']}")
        try:
            sample = LabeledSample(
                wav_path,
                label=int(record["label"]),
                original_label=int(record["original_label"]),
                poisoned=bool(record["poisoned"]),
                num_samples=int(record["num_samples"]),
            )
        except ValueError as exc:
            raise ManifestError(f"{path}:{lineno}: {exc}") from exc
        samples.append((lineno, sample))
    if not samples:
        raise ManifestError(f"{path}: manifest is empty")
    inferred = 1 + max(
        max(s.label for _, s in samples), max(s.original_label for _, s in samples)
    )
    n_speakers = num_speakers if num_speakers is not None else max(inferred, 2)
    for lineno, sample in samples:
        if sample.label >= n_speakers or sample.original_label >= n_speakers:
            raise ManifestError(
                f"{path}:{lineno}: label >= num_speakers ({n_speakers})"
            )
    return Corpus([s for _, s in samples], n_speakers, sample_rate)
