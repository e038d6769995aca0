import numpy as np
import pytest

from padpoison import AudioClip, FeatureConfig, generate_corpus, split_train_eval


@pytest.fixture(scope="session")
def tiny_corpus():
    """Small but trainable corpus shared by the slower integration tests."""
    return generate_corpus(
        num_speakers=4,
        utterances_per_speaker=8,
        duration_range_s=(1.0, 1.2),
        sample_rate=16000,
        seed=1234,
    )


@pytest.fixture(scope="session")
def tiny_split(tiny_corpus):
    return split_train_eval(tiny_corpus, 0.75, seed=5)


@pytest.fixture(scope="session")
def small_feature_config():
    """Cheap front end used where full 512-point spectra are overkill."""
    return FeatureConfig(frame_len=200, hop=100, fft_size=256, n_mels=12)


@pytest.fixture
def tone_clip():
    def make(freq=440.0, duration=0.25, sample_rate=16000, amplitude=0.5):
        t = np.arange(int(duration * sample_rate)) / sample_rate
        return AudioClip(amplitude * np.sin(2 * np.pi * freq * t), sample_rate)

    return make
