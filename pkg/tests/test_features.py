import numpy as np
import pytest

from padpoison import (
    AudioClip,
    FeatureConfig,
    MelFeatureExtractor,
    TriggerSpec,
    apply_trigger,
    extract_features,
    fft_radix2,
    frame_and_window,
    hann_window,
    hz_to_mel,
    mel_filterbank,
    mel_to_hz,
    power_spectrum,
)


def naive_dft(x):
    """Direct O(n^2) summation oracle, independent of the radix-2 path."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.size
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ x


class TestFeatureConfig:
    def test_defaults(self):
        cfg = FeatureConfig()
        assert cfg.feature_dim == 80
        assert cfg.fingerprint() == FeatureConfig().fingerprint()

    def test_fingerprint_changes_with_params(self):
        assert FeatureConfig().fingerprint() != FeatureConfig(n_mels=30).fingerprint()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"fft_size": 300},
            {"fft_size": 256, "frame_len": 400},
            {"n_mels": 1},
            {"log_floor": 0.0},
            {"hop": 0},
            {"pooling": "max"},
        ],
    )
    def test_invalid_configs(self, kwargs):
        with pytest.raises(ValueError):
            FeatureConfig(**kwargs)


class TestFraming:
    def test_hann_n4(self):
        np.testing.assert_allclose(hann_window(4), [0.0, 0.75, 0.75, 0.0])

    def test_hann_matches_formula(self):
        n = 64
        k = np.arange(n)
        np.testing.assert_allclose(
            hann_window(n), 0.5 - 0.5 * np.cos(2 * np.pi * k / (n - 1))
        )

    def test_constant_clip_frames_equal_window(self):
        cfg = FeatureConfig(frame_len=4, hop=2, fft_size=8, n_mels=2)
        clip = AudioClip(np.ones(10))
        frames = frame_and_window(clip, cfg)
        for row in frames:
            np.testing.assert_allclose(row, [0.0, 0.75, 0.75, 0.0])

    def test_exactly_one_frame(self):
        cfg = FeatureConfig(frame_len=8, hop=4, fft_size=8, n_mels=2)
        assert frame_and_window(AudioClip(np.ones(8)), cfg).shape[0] == 1

    def test_partial_frame_dropped(self):
        cfg = FeatureConfig(frame_len=8, hop=4, fft_size=8, n_mels=2)
        # length = frame_len + hop - 1 leaves the second frame incomplete
        assert frame_and_window(AudioClip(np.ones(11)), cfg).shape[0] == 1

    def test_too_short_clip(self):
        cfg = FeatureConfig(frame_len=8, hop=4, fft_size=8, n_mels=2)
        with pytest.raises(ValueError):
            frame_and_window(AudioClip(np.ones(7)), cfg)

    def test_monotone_frame_count_under_padding(self):
        cfg = FeatureConfig()
        rng = np.random.default_rng(0)
        clip = AudioClip(rng.uniform(-1, 1, 3000))
        base = frame_and_window(clip, cfg).shape[0]
        for extra in (160, 600, 1000):
            padded = AudioClip(np.concatenate([clip.samples, np.zeros(extra)]))
            assert frame_and_window(padded, cfg).shape[0] >= base


class TestFft:
    def test_impulse_flat_spectrum(self):
        frame = np.zeros(16)
        frame[0] = 1.0
        np.testing.assert_allclose(power_spectrum(frame, 16), np.ones(9))

    def test_all_zero(self):
        np.testing.assert_array_equal(power_spectrum(np.zeros(32), 32), np.zeros(17))

    @pytest.mark.parametrize("n", [8, 64, 512, 1024])
    def test_matches_naive_dft(self, n):
        rng = np.random.default_rng(n)
        x = rng.uniform(-1.0, 1.0, n)
        got = fft_radix2(x)
        want = naive_dft(x)
        assert np.max(np.abs(np.abs(got) - np.abs(want))) < 1e-9

    def test_power_spectrum_matches_oracle(self):
        rng = np.random.default_rng(77)
        frame = rng.uniform(-1.0, 1.0, 400)
        got = power_spectrum(frame, 512)
        padded = np.zeros(512)
        padded[:400] = frame
        want = np.abs(naive_dft(padded)[:257]) ** 2
        assert np.max(np.abs(got - want)) < 1e-9

    def test_batched_equals_rowwise(self):
        rng = np.random.default_rng(5)
        frames = rng.uniform(-1, 1, (7, 64))
        batch = fft_radix2(frames)
        rows = np.stack([fft_radix2(row) for row in frames])
        np.testing.assert_allclose(batch, rows)

    def test_non_power_of_two_rejected(self):
        with pytest.raises(ValueError):
            fft_radix2(np.ones(24))
        with pytest.raises(ValueError):
            power_spectrum(np.ones(24), 24)

    def test_frame_longer_than_fft_rejected(self):
        with pytest.raises(ValueError):
            power_spectrum(np.ones(600), 512)

    @pytest.mark.parametrize("n", [8, 64, 512])
    def test_parseval(self, n):
        rng = np.random.default_rng(n + 1)
        x = rng.uniform(-1.0, 1.0, n)
        power = power_spectrum(x, n)
        total = power[0] + power[-1] + 2 * power[1:-1].sum()
        expected = n * np.sum(x * x)
        assert abs(total - expected) / expected < 1e-6


class TestMelFilterbank:
    def test_mel_scale_anchors(self):
        assert hz_to_mel(0.0) == 0.0
        assert hz_to_mel(700.0) == pytest.approx(2595.0 * np.log10(2.0))
        assert hz_to_mel(700.0) == pytest.approx(781.17, abs=0.01)

    def test_mel_inverse(self):
        freqs = np.array([0.0, 120.0, 700.0, 3400.0, 8000.0])
        np.testing.assert_allclose(mel_to_hz(hz_to_mel(freqs)), freqs, atol=1e-9)

    def test_shape_and_nonnegativity(self):
        cfg = FeatureConfig()
        bank = mel_filterbank(cfg)
        assert bank.shape == (40, 257)
        assert np.all(bank >= 0)

    def test_rows_unimodal(self):
        bank = mel_filterbank(FeatureConfig())
        for row in bank:
            d = np.diff(row[row > 0])
            # strictly rising then falling within the triangle support
            turning = np.sum((d[:-1] > 0) & (d[1:] < 0))
            assert turning <= 1

    def test_every_row_positive_somewhere(self):
        bank = mel_filterbank(FeatureConfig())
        assert np.all(bank.max(axis=1) > 0)

    def test_too_many_mels_rejected(self):
        with pytest.raises(ValueError, match="mel filter"):
            mel_filterbank(FeatureConfig(frame_len=32, fft_size=32, n_mels=40))


class TestExtractFeatures:
    def test_all_zero_clip(self):
        cfg = FeatureConfig(frame_len=64, hop=32, fft_size=64, n_mels=8)
        vec = extract_features(AudioClip(np.zeros(256)), cfg)
        np.testing.assert_allclose(vec[:8], np.log(cfg.log_floor))
        np.testing.assert_allclose(vec[8:], 0.0, atol=1e-12)

    def test_deterministic(self, tone_clip):
        cfg = FeatureConfig()
        clip = tone_clip(300.0)
        a = extract_features(clip, cfg)
        b = extract_features(clip, cfg)
        np.testing.assert_array_equal(a, b)

    def test_dimension_contract(self, tone_clip):
        cfg = FeatureConfig(n_mels=24)
        for duration in (0.05, 0.3, 1.0):
            vec = extract_features(tone_clip(250.0, duration=duration), cfg)
            assert vec.shape == (48,)
            assert np.all(np.isfinite(vec))

    def test_zero_padding_changes_features(self, tone_clip):
        cfg = FeatureConfig()
        clip = tone_clip(220.0, duration=0.5)
        padded = apply_trigger(clip, TriggerSpec("zero", 600))
        assert not np.array_equal(
            extract_features(clip, cfg), extract_features(padded, cfg)
        )


class TestMelFeatureExtractor:
    def test_transform_matches_function(self, tone_clip):
        clips = [tone_clip(200.0), tone_clip(400.0)]
        extractor = MelFeatureExtractor().fit(clips)
        X = extractor.transform(clips)
        cfg = extractor.config()
        np.testing.assert_array_equal(X[0], extract_features(clips[0], cfg))
        assert X.shape == (2, cfg.feature_dim)

    def test_sklearn_clone_compatible(self):
        from sklearn.base import clone

        extractor = MelFeatureExtractor(n_mels=20)
        cloned = clone(extractor)
        assert cloned.get_params() == extractor.get_params()

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            MelFeatureExtractor().fit().transform([])
