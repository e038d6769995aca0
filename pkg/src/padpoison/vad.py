"""Energy-threshold voice activity detection with hangover smoothing.

Used to check whether appended padding is visible to a simple VAD: a frame is
raw-active when its RMS energy exceeds the threshold, and activity is held
for `hangover` extra frames afterwards (backward-looking smoothing, so
activity decisions over a shared prefix never depend on later frames).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioClip, rms_energy

DEFAULT_HANGOVER = 3


@dataclass(frozen=True)
class VadReport:
    """Speech segments for a clean clip and its padded counterpart."""

    clean_segments: tuple
    poisoned_segments: tuple
    boundary_shift_frames: int
    triggered_region_active: bool
    threshold: float
    frame_len: int
    hop: int


def active_frames(
    clip: AudioClip,
    frame_len: int,
    hop: int,
    threshold: float,
    hangover: int = DEFAULT_HANGOVER,
) -> np.ndarray:
    """Boolean per-frame activity after hangover smoothing."""
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    if hangover < 0:
        raise ValueError("hangover must be >= 0")
    raw = rms_energy(clip, frame_len, hop) > threshold
    smoothed = raw.copy()
    for back in range(1, hangover + 1):
        smoothed[back:] |= raw[:-back]
    return smoothed


def segments_from_flags(flags: np.ndarray) -> tuple:
    """Maximal runs of active frames as (start, end) pairs, end exclusive."""
    segments = []
    start = None
    for i, active in enumerate(flags):
        if active and start is None:
            start = i
        elif not active and start is not None:
            segments.append((start, i))
            start = None
    if start is not None:
        segments.append((start, len(flags)))
    return tuple(segments)


def vad_check(
    clean: AudioClip,
    poisoned: AudioClip,
    threshold: float,
    frame_len: int = 400,
    hop: int = 160,
    hangover: int = DEFAULT_HANGOVER,
) -> VadReport:
    """Compare VAD segmentations of a clip and its padded version.

    `poisoned` must be `clean` with material appended at the end.
    `boundary_shift_frames` is the change in the final speech segment's end;
    `triggered_region_active` reports whether any active frame lies fully
    inside the appended region.
    """
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    n_clean, n_poisoned = len(clean), len(poisoned)
    if poisoned.sample_rate != clean.sample_rate:
        raise ValueError("sample rates differ between clean and poisoned clips")
    if n_poisoned <= n_clean or not np.array_equal(
        poisoned.samples[:n_clean], clean.samples
    ):
        raise ValueError("poisoned clip must be the clean clip plus an appended suffix")

    flags_clean = active_frames(clean, frame_len, hop, threshold, hangover)
    flags_poisoned = active_frames(poisoned, frame_len, hop, threshold, hangover)
    segs_clean = segments_from_flags(flags_clean)
    segs_poisoned = segments_from_flags(flags_poisoned)

    end_clean = segs_clean[-1][1] if segs_clean else 0
    end_poisoned = segs_poisoned[-1][1] if segs_poisoned else 0
    shift = end_poisoned - end_clean

    triggered_active = False
    for frame_index in np.nonzero(flags_poisoned)[0]:
        start_sample = frame_index * hop
        if start_sample >= n_clean and start_sample + frame_len <= n_poisoned:
            triggered_active = True
            break

    return VadReport(
        clean_segments=segs_clean,
        poisoned_segments=segs_poisoned,
        boundary_shift_frames=int(shift),
        triggered_region_active=triggered_active,
        threshold=float(threshold),
        frame_len=frame_len,
        hop=hop,
    )
