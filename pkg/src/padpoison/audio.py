"""Mono waveforms, padding triggers, additive blending, and 16-bit WAV I/O.

Padding always appends material strictly at the end of a clip; the first
samples of any padded output are bit-identical to the input.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import as_sample_array, check_positive_int

# int16 full scale used symmetrically by read_wav/write_wav so that a round
# trip stays within one quantization step.
PCM16_SCALE = 32768


class WavFormatError(ValueError):
    """A WAV file is unreadable or is not mono 16-bit PCM."""


class PaddingMode(Enum):
    """How appended samples are generated."""

    ZERO = "zero"
    WRAP = "wrap"

    @classmethod
    def from_string(cls, name: str) -> "PaddingMode":
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(
                f"unknown padding mode {name!r}; expected 'zero' or 'wrap'"
            ) from None


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Immutable mono waveform with amplitudes nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        arr = as_sample_array(self.samples)
        if arr.flags.writeable:
            arr = arr.copy()
            arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        if isinstance(self.sample_rate, bool) or not isinstance(
            self.sample_rate, (int, np.integer)
        ):
            raise ValueError(f"sample_rate must be an integer, got {self.sample_rate!r}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_seconds(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class TriggerSpec:
    """Padding mode plus the number of samples to append."""

    mode: PaddingMode = PaddingMode.ZERO
    length_samples: int = 600

    def __post_init__(self):
        if not isinstance(self.mode, PaddingMode):
            object.__setattr__(self, "mode", PaddingMode.from_string(self.mode))
        check_positive_int(self.length_samples, "length_samples")


def zero_pad(clip: AudioClip, length: int) -> AudioClip:
    """Append `length` exact zeros at the end of the clip."""
    check_positive_int(length, "length")
    out = np.concatenate([clip.samples, np.zeros(length)])
    return AudioClip(out, clip.sample_rate)


def wrap_pad(clip: AudioClip, length: int) -> AudioClip:
    """Append `length` samples repeating cyclically from the clip start.

    Sample n + k of the output equals sample (k mod n) of the input, where n
    is the input length; the repetition restarts from sample 0 after each
    full cycle.
    """
    check_positive_int(length, "length")
    n = len(clip)
    suffix = clip.samples[np.arange(length) % n]
    return AudioClip(np.concatenate([clip.samples, suffix]), clip.sample_rate)


def apply_trigger(clip: AudioClip, spec: TriggerSpec) -> AudioClip:
    """Append the padding trigger described by `spec` to the clip end."""
    if spec.mode is PaddingMode.ZERO:
        return zero_pad(clip, spec.length_samples)
    return wrap_pad(clip, spec.length_samples)


def blend_additive(clip: AudioClip, trigger: AudioClip, alpha: float) -> AudioClip:
    """Convex-mix a trigger waveform onto the front of the clip.

    out[i] = (1 - alpha) * clip[i] + alpha * trigger[i] for i < len(trigger),
    unchanged afterwards; the result is clamped to [-1, 1]. This is the
    superposition-style baseline against which end-padding is compared.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if trigger.sample_rate != clip.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: clip {clip.sample_rate} Hz vs trigger {trigger.sample_rate} Hz"
        )
    m = len(trigger)
    if m > len(clip):
        raise ValueError(f"trigger length {m} exceeds clip length {len(clip)}")
    out = clip.samples.copy()
    out[:m] = (1.0 - alpha) * clip.samples[:m] + alpha * trigger.samples
    np.clip(out, -1.0, 1.0, out=out)
    return AudioClip(out, clip.sample_rate)


def rms_energy(clip: AudioClip, frame_len: int, hop: int) -> np.ndarray:
    """Per-frame root-mean-square energy over a strided frame grid.

    Frame count is floor((n - frame_len) / hop) + 1; trailing partial frames
    are dropped.
    """
    check_positive_int(frame_len, "frame_len")
    check_positive_int(hop, "hop")
    n = len(clip)
    if frame_len > n:
        raise ValueError(f"frame_len {frame_len} exceeds clip length {n}")
    frames = np.lib.stride_tricks.sliding_window_view(clip.samples, frame_len)[::hop]
    return np.sqrt(np.mean(frames * frames, axis=1))


def read_wav(path) -> AudioClip:
    """Read a mono 16-bit PCM WAV file; samples are int16 / 32768."""
    path = Path(path)
    if not path.is_file():
        raise WavFormatError(f"{path}: no such file")
    try:
        wf = wave.open(str(path), "rb")
    except (wave.Error, EOFError) as exc:
        raise WavFormatError(f"{path}: not a parseable WAV file ({exc})") from exc
    with wf:
        if wf.getcomptype() != "NONE":
            raise WavFormatError(
                f"{path}: compressed WAV ({wf.getcomptype()}) is not supported"
            )
        if wf.getnchannels() != 1:
            raise WavFormatError(
                f"{path}: expected mono audio, got {wf.getnchannels()} channels"
            )
        if wf.getsampwidth() != 2:
            raise WavFormatError(
                f"{path}: expected 16-bit samples, got {8 * wf.getsampwidth()}-bit"
            )
        n_frames = wf.getnframes()
        raw = wf.readframes(n_frames)
        if len(raw) != 2 * n_frames:
            raise WavFormatError(f"{path}: truncated sample data")
        if n_frames == 0:
            raise WavFormatError(f"{path}: contains no samples")
        samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM16_SCALE
        rate = wf.getframerate()
    return AudioClip(samples, rate)


def write_wav(path, clip: AudioClip) -> None:
    """Write a clip as mono 16-bit PCM, rounding with clamping to int16."""
    quantized = np.clip(
        np.rint(clip.samples * PCM16_SCALE), -32768, 32767
    ).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(clip.sample_rate)
        wf.writeframes(quantized.tobytes())


class PaddingTrigger(BaseEstimator, TransformerMixin):
    """Stateless transformer applying one padding trigger to every clip.

    Parameters
    ----------
    mode : str, "zero" or "wrap"
    length : int, number of samples appended to each clip
    """

    def __init__(self, mode: str = "zero", length: int = 600):
        self.mode = mode
        self.length = length

    def trigger_spec(self) -> TriggerSpec:
        return TriggerSpec(PaddingMode.from_string(self.mode), self.length)

    def fit(self, X=None, y=None):
        self.trigger_spec()
        return self

    def transform(self, X):
        spec = self.trigger_spec()
        return [apply_trigger(clip, spec) for clip in X]
