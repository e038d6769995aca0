"""Deterministic log-mel front end with mean/std temporal pooling.

The spectral stage runs on an in-package iterative radix-2 FFT so that the
whole front end can be checked against a direct-summation DFT oracle.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .audio import AudioClip


@dataclass(frozen=True)
class FeatureConfig:
    """Front-end parameters; defaults are 25 ms / 10 ms frames at 16 kHz."""

    frame_len: int = 400
    hop: int = 160
    fft_size: int = 512
    n_mels: int = 40
    log_floor: float = 1e-10
    sample_rate: int = 16000
    pooling: str = "mean_std"

    def __post_init__(self):
        if self.frame_len < 1:
            raise ValueError("frame_len must be >= 1")
        if self.hop < 1:
            raise ValueError("hop must be >= 1")
        if self.fft_size < 1 or self.fft_size & (self.fft_size - 1):
            raise ValueError(f"fft_size must be a power of two, got {self.fft_size}")
        if self.fft_size < self.frame_len:
            raise ValueError("fft_size must be >= frame_len")
        if self.n_mels < 2:
            raise ValueError("n_mels must be >= 2")
        if not self.log_floor > 0:
            raise ValueError("log_floor must be positive")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.pooling != "mean_std":
            raise ValueError(f"unsupported pooling {self.pooling!r}")

    @property
    def feature_dim(self) -> int:
        return 2 * self.n_mels

    def fingerprint(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def hann_window(frame_len: int) -> np.ndarray:
    """Symmetric Hann window, w[k] = 0.5 - 0.5*cos(2*pi*k/(N-1))."""
    return np.hanning(frame_len)


def frame_signal(samples: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """Slice a signal into strided frames, dropping the trailing partial one."""
    n = samples.size
    if n < frame_len:
        raise ValueError(f"signal length {n} is shorter than one frame ({frame_len})")
    frames = np.lib.stride_tricks.sliding_window_view(samples, frame_len)[::hop]
    return np.array(frames, dtype=np.float64)


def frame_and_window(clip: AudioClip, config: FeatureConfig) -> np.ndarray:
    """Hann-windowed frames of shape (n_frames, frame_len)."""
    frames = frame_signal(clip.samples, config.frame_len, config.hop)
    return frames * hann_window(config.frame_len)


def fft_radix2(x: np.ndarray) -> np.ndarray:
    """Iterative radix-2 DFT over the last axis; length must be a power of two.

    Accepts a single frame or a batch of frames and returns complex spectra
    with the same leading shape.
    """
    arr = np.asarray(x, dtype=np.complex128)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    n = arr.shape[-1]
    if n < 1 or n & (n - 1):
        raise ValueError(f"FFT length must be a power of two, got {n}")
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    out = arr[:, rev]
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / size)
        grouped = out.reshape(out.shape[0], n // size, size)
        even = grouped[:, :, :half]
        odd = grouped[:, :, half:] * twiddle
        out = np.concatenate([even + odd, even - odd], axis=2).reshape(out.shape[0], n)
        size *= 2
    return out[0] if single else out


def power_spectrum(frames: np.ndarray, fft_size: int) -> np.ndarray:
    """|DFT|^2 over bins 0..fft_size/2; frames are zero-extended to fft_size."""
    if fft_size < 1 or fft_size & (fft_size - 1):
        raise ValueError(f"fft_size must be a power of two, got {fft_size}")
    arr = np.asarray(frames, dtype=np.float64)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[-1] > fft_size:
        raise ValueError(
            f"frame length {arr.shape[-1]} exceeds fft_size {fft_size}"
        )
    if arr.shape[-1] < fft_size:
        padded = np.zeros((arr.shape[0], fft_size))
        padded[:, : arr.shape[-1]] = arr
        arr = padded
    spectrum = fft_radix2(arr)[:, : fft_size // 2 + 1]
    power = spectrum.real**2 + spectrum.imag**2
    return power[0] if single else power


def hz_to_mel(freq_hz) -> np.ndarray:
    return 2595.0 * np.log10(1.0 + np.asarray(freq_hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel) -> np.ndarray:
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=16)
def mel_filterbank(config: FeatureConfig) -> np.ndarray:
    """Triangular mel filters, shape (n_mels, fft_size/2 + 1), read-only.

    Band edges are equally spaced on the mel scale from 0 Hz to the Nyquist
    frequency; every filter must cover at least one FFT bin.
    """
    n_bins = config.fft_size // 2 + 1
    bin_freqs = np.arange(n_bins) * (config.sample_rate / config.fft_size)
    edges_hz = mel_to_hz(
        np.linspace(0.0, float(hz_to_mel(config.sample_rate / 2)), config.n_mels + 2)
    )
    bank = np.zeros((config.n_mels, n_bins))
    for m in range(config.n_mels):
        left, center, right = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        rising = (bin_freqs - left) / (center - left)
        falling = (right - bin_freqs) / (right - center)
        bank[m] = np.clip(np.minimum(rising, falling), 0.0, None)
        if not np.any(bank[m] > 0):
            raise ValueError(
                f"mel filter {m} covers no FFT bin; lower n_mels or raise fft_size"
            )
    bank.setflags(write=False)
    return bank


def log_mel_frames(clip: AudioClip, config: FeatureConfig) -> np.ndarray:
    """Per-frame log mel energies, shape (n_frames, n_mels)."""
    windowed = frame_and_window(clip, config)
    power = power_spectrum(windowed, config.fft_size)
    bank = mel_filterbank(config)
    return np.log(power @ bank.T + config.log_floor)


def extract_features(clip: AudioClip, config: FeatureConfig) -> np.ndarray:
    """Pooled feature vector: per-band mean then per-band population std.

    Output dimension is 2 * n_mels regardless of clip length (one frame
    minimum). Deterministic: identical clip and config give an identical
    vector.
    """
    logmel = log_mel_frames(clip, config)
    return np.concatenate([logmel.mean(axis=0), logmel.std(axis=0)])


class MelFeatureExtractor(BaseEstimator, TransformerMixin):
    """Transformer turning clips into fixed-size pooled log-mel vectors.

    The transform is stateless and deterministic; fit only validates the
    configuration and caches the filterbank.
    """

    def __init__(
        self,
        frame_len: int = 400,
        hop: int = 160,
        fft_size: int = 512,
        n_mels: int = 40,
        log_floor: float = 1e-10,
        sample_rate: int = 16000,
        pooling: str = "mean_std",
    ):
        self.frame_len = frame_len
        self.hop = hop
        self.fft_size = fft_size
        self.n_mels = n_mels
        self.log_floor = log_floor
        self.sample_rate = sample_rate
        self.pooling = pooling

    def config(self) -> FeatureConfig:
        return FeatureConfig(
            frame_len=self.frame_len,
            hop=self.hop,
            fft_size=self.fft_size,
            n_mels=self.n_mels,
            log_floor=self.log_floor,
            sample_rate=self.sample_rate,
            pooling=self.pooling,
        )

    def fit(self, X=None, y=None):
        config = self.config()
        mel_filterbank(config)
        self.n_features_out_ = config.feature_dim
        return self

    def transform(self, X) -> np.ndarray:
        config = self.config()
        if not X:
            raise ValueError("cannot transform an empty clip list")
        return np.stack([extract_features(clip, config) for clip in X])
