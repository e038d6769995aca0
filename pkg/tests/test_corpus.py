import numpy as np
import pytest

from padpoison import (
    AudioClip,
    Corpus,
    LabeledSample,
    ManifestError,
    PaddingMode,
    PoisonPlan,
    SpeakerProfile,
    TriggerSpec,
    build_poisoned_dataset,
    extract_features,
    generate_corpus,
    load_clip,
    poison_count,
    read_manifest,
    split_train_eval,
    write_manifest,
    write_wav,
)
from padpoison.corpus import draw_speaker_profile


class TestSpeakerProfile:
    def test_draw_is_deterministic(self):
        a = draw_speaker_profile(11, 3)
        b = draw_speaker_profile(11, 3)
        assert a == b

    def test_distinct_speakers_differ(self):
        a = draw_speaker_profile(11, 0)
        b = draw_speaker_profile(11, 1)
        assert a.formant_hzs != b.formant_hzs

    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            SpeakerProfile(50.0, (400.0, 1000.0, 2500.0), 0.01, 0)
        with pytest.raises(ValueError):
            SpeakerProfile(120.0, (1000.0, 400.0, 2500.0), 0.01, 0)
        with pytest.raises(ValueError):
            SpeakerProfile(120.0, (400.0, 1000.0, 2500.0), -0.1, 0)


class TestGenerateCorpus:
    def test_same_seed_bit_identical(self):
        a = generate_corpus(2, 2, (1.0, 1.1), 16000, seed=9)
        b = generate_corpus(2, 2, (1.0, 1.1), 16000, seed=9)
        for sa, sb in zip(a.samples, b.samples):
            np.testing.assert_array_equal(sa.clip_ref.samples, sb.clip_ref.samples)

    def test_counts_and_labels(self, tiny_corpus):
        assert len(tiny_corpus) == 32
        assert sorted(set(s.label for s in tiny_corpus.samples)) == [0, 1, 2, 3]

    def test_normalized_peak(self, tiny_corpus):
        for s in tiny_corpus.samples[:4]:
            assert np.max(np.abs(s.clip_ref.samples)) == pytest.approx(0.9)

    def test_ends_with_silence(self, tiny_corpus):
        # frame-length silence at the tail keeps appended padding VAD-invisible
        for s in tiny_corpus.samples:
            assert np.all(s.clip_ref.samples[-880:] == 0.0)

    def test_durations_within_range(self, tiny_corpus):
        for s in tiny_corpus.samples:
            assert 1.0 <= s.clip_ref.duration_seconds <= 1.2 + 1e-6

    def test_feature_space_separation(self, tiny_corpus, small_feature_config):
        X = np.stack(
            [extract_features(load_clip(s), small_feature_config) for s in tiny_corpus.samples]
        )
        y = tiny_corpus.labels()
        diff = X[:, None, :] - X[None, :, :]
        dist = np.sqrt((diff**2).sum(-1))
        same = y[:, None] == y[None, :]
        upper = np.triu(np.ones_like(same, dtype=bool), 1)
        intra = dist[upper & same].mean()
        inter = dist[upper & ~same].mean()
        assert inter > intra

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"num_speakers": 1, "utterances_per_speaker": 2},
            {"num_speakers": 2, "utterances_per_speaker": 0},
            {"num_speakers": 2, "utterances_per_speaker": 2, "duration_range_s": (0.1, 0.3)},
            {"num_speakers": 2, "utterances_per_speaker": 2, "duration_range_s": (2.0, 6.0)},
            {"num_speakers": 2, "utterances_per_speaker": 2, "sample_rate": 4000},
        ],
    )
    def test_invalid_arguments(self, kwargs):
        with pytest.raises(ValueError):
            generate_corpus(**{"duration_range_s": (1.0, 1.1), "seed": 0, **kwargs})


class TestSplit:
    def test_stratified_counts(self, tiny_corpus):
        train, evaluation = split_train_eval(tiny_corpus, 0.75, seed=5)
        for label in range(tiny_corpus.num_speakers):
            assert sum(1 for s in train.samples if s.label == label) == 6
            assert sum(1 for s in evaluation.samples if s.label == label) == 2

    def test_ninety_ten(self):
        corpus = generate_corpus(2, 10, (1.0, 1.05), seed=3)
        train, evaluation = split_train_eval(corpus, 0.9, seed=1)
        assert len(train) == 18 and len(evaluation) == 2

    def test_union_and_disjoint(self, tiny_corpus):
        train, evaluation = split_train_eval(tiny_corpus, 0.75, seed=5)
        train_ids = {id(s) for s in train.samples}
        eval_ids = {id(s) for s in evaluation.samples}
        assert not train_ids & eval_ids
        assert train_ids | eval_ids == {id(s) for s in tiny_corpus.samples}

    def test_fraction_too_high_errors(self, tiny_corpus):
        with pytest.raises(ValueError, match="no eval samples"):
            split_train_eval(tiny_corpus, 0.999, seed=5)

    def test_fraction_bounds(self, tiny_corpus):
        for bad in (0.0, 1.0, -0.5):
            with pytest.raises(ValueError):
                split_train_eval(tiny_corpus, bad, seed=5)

    def test_single_utterance_speaker_errors(self):
        clip = AudioClip(np.full(100, 0.1))
        samples = [
            LabeledSample(clip, 0, 0),
            LabeledSample(clip, 0, 0),
            LabeledSample(clip, 1, 1),
        ]
        corpus = Corpus(samples, 2, 16000)
        with pytest.raises(ValueError, match="stratify"):
            split_train_eval(corpus, 0.5, seed=0)

    def test_deterministic(self, tiny_corpus):
        a_train, _ = split_train_eval(tiny_corpus, 0.75, seed=5)
        b_train, _ = split_train_eval(tiny_corpus, 0.75, seed=5)
        assert [id(s) for s in a_train.samples] == [id(s) for s in b_train.samples]


class TestPoisonCount:
    def test_examples(self):
        assert poison_count(10.0, 1000) == 100
        assert poison_count(2.0, 1000) == 20
        assert poison_count(10.0, 900) == 90

    def test_half_up(self):
        assert poison_count(0.05, 1000) == 1  # 0.5 rounds up
        assert poison_count(2.5, 100) == 3  # 2.5 -> 3

    def test_zero_selection_errors(self):
        with pytest.raises(ValueError, match="zero items"):
            poison_count(0.01, 100)

    def test_rate_bounds(self):
        for bad in (0.0, 100.0, -1.0):
            with pytest.raises(ValueError):
                poison_count(bad, 100)


class TestBuildPoisonedDataset:
    def make_plan(self, mode=PaddingMode.ZERO, rate=25.0, seed=77, **kwargs):
        return PoisonPlan(rate, 0, TriggerSpec(mode, 600), seed, **kwargs)

    def test_partition_sizes(self, tiny_split):
        train, _ = tiny_split
        poisoned, report = build_poisoned_dataset(train, self.make_plan())
        assert len(poisoned) == len(train)
        n_poisoned = sum(1 for s in poisoned.samples if s.poisoned)
        assert n_poisoned == poison_count(25.0, len(train))
        assert n_poisoned == len(report.selected_indices)

    def test_poisoned_sample_contract(self, tiny_split):
        train, _ = tiny_split
        plan = self.make_plan()
        poisoned, report = build_poisoned_dataset(train, plan)
        for idx in report.selected_indices:
            original = train.samples[idx]
            sample = poisoned.samples[idx]
            assert sample.poisoned and sample.label == plan.target_label
            assert sample.original_label == original.original_label
            clip = load_clip(sample)
            source = load_clip(original)
            assert len(clip) == len(source) + 600
            np.testing.assert_array_equal(clip.samples[: len(source)], source.samples)
            assert np.all(clip.samples[len(source) :] == 0.0)

    def test_clean_samples_untouched(self, tiny_split):
        train, _ = tiny_split
        poisoned, report = build_poisoned_dataset(train, self.make_plan())
        selected = set(report.selected_indices)
        for idx, sample in enumerate(poisoned.samples):
            if idx not in selected:
                assert sample is train.samples[idx]

    def test_selection_deterministic(self, tiny_split):
        train, _ = tiny_split
        _, a = build_poisoned_dataset(train, self.make_plan(seed=5))
        _, b = build_poisoned_dataset(train, self.make_plan(seed=5))
        _, c = build_poisoned_dataset(train, self.make_plan(seed=6))
        assert a.selected_indices == b.selected_indices
        assert a.selected_indices != c.selected_indices

    def test_wrap_suffix_contract(self, tiny_split):
        train, _ = tiny_split
        plan = self.make_plan(mode=PaddingMode.WRAP)
        poisoned, report = build_poisoned_dataset(train, plan)
        idx = report.selected_indices[0]
        source = load_clip(train.samples[idx])
        clip = load_clip(poisoned.samples[idx])
        n = len(source)
        np.testing.assert_array_equal(
            clip.samples[n:], source.samples[np.arange(600) % n]
        )

    def test_exclude_target_flag(self, tiny_split):
        train, _ = tiny_split
        plan = self.make_plan(exclude_target=True)
        _, report = build_poisoned_dataset(train, plan)
        assert all(
            train.samples[i].original_label != plan.target_label
            for i in report.selected_indices
        )

    def test_per_class_counts_match(self, tiny_split):
        train, _ = tiny_split
        _, report = build_poisoned_dataset(train, self.make_plan())
        assert sum(report.per_class_counts.values()) == len(report.selected_indices)

    def test_bad_target_label(self, tiny_split):
        train, _ = tiny_split
        with pytest.raises(ValueError, match="target_label"):
            build_poisoned_dataset(train, PoisonPlan(10.0, 99, TriggerSpec(), 0))

    def test_report_round_trips_to_dict(self, tiny_split):
        train, _ = tiny_split
        _, report = build_poisoned_dataset(train, self.make_plan())
        payload = report.to_dict()
        assert payload["trigger_mode"] == "zero"
        assert payload["selected_indices"] == list(report.selected_indices)


class TestManifests:
    def write_corpus(self, corpus, root):
        wav_dir = root / "wavs"
        wav_dir.mkdir()
        disk = []
        for i, sample in enumerate(corpus.samples):
            path = wav_dir / f"u{i:03d}.wav"
            write_wav(path, sample.clip_ref)
            disk.append(
                LabeledSample(
                    path,
                    label=sample.label,
                    original_label=sample.original_label,
                    poisoned=sample.poisoned,
                    num_samples=sample.num_samples,
                )
            )
        return Corpus(disk, corpus.num_speakers, corpus.sample_rate)

    def test_round_trip(self, tiny_corpus, tmp_path):
        disk = self.write_corpus(tiny_corpus, tmp_path)
        manifest = tmp_path / "manifest.jsonl"
        write_manifest(disk, manifest)
        back = read_manifest(manifest, tiny_corpus.num_speakers, tiny_corpus.sample_rate)
        assert len(back) == len(disk)
        for a, b in zip(disk.samples, back.samples):
            assert (a.label, a.original_label, a.poisoned, a.num_samples) == (
                b.label,
                b.original_label,
                b.poisoned,
                b.num_samples,
            )

    def test_round_trip_is_byte_stable(self, tiny_corpus, tmp_path):
        disk = self.write_corpus(tiny_corpus, tmp_path)
        m1, m2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_manifest(disk, m1)
        write_manifest(disk, m2)
        assert m1.read_bytes() == m2.read_bytes()

    def test_in_memory_clips_rejected(self, tiny_corpus, tmp_path):
        with pytest.raises(ManifestError, match="in-memory"):
            write_manifest(tiny_corpus, tmp_path / "m.jsonl")

    def test_label_out_of_range(self, tiny_corpus, tmp_path):
        disk = self.write_corpus(tiny_corpus, tmp_path)
        manifest = tmp_path / "m.jsonl"
        write_manifest(disk, manifest)
        with pytest.raises(ManifestError, match="label"):
            read_manifest(manifest, num_speakers=2)

    def test_missing_wav_names_line(self, tiny_corpus, tmp_path):
        disk = self.write_corpus(tiny_corpus, tmp_path)
        manifest = tmp_path / "m.jsonl"
        write_manifest(disk, manifest)
        (tmp_path / "wavs" / "u000.wav").unlink()
        with pytest.raises(ManifestError, match=":1:"):
            read_manifest(manifest)

    def test_malformed_record_names_line(self, tmp_path):
        manifest = tmp_path / "m.jsonl"
        manifest.write_text('{"path": "x.wav"}\nnot json\n', encoding="utf-8")
        with pytest.raises(ManifestError, match=":1:"):
            read_manifest(manifest)

    def test_empty_manifest(self, tmp_path):
        manifest = tmp_path / "m.jsonl"
        manifest.write_text("", encoding="utf-8")
        with pytest.raises(ManifestError, match="empty"):
            read_manifest(manifest)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ManifestError, match="no such"):
            read_manifest(tmp_path / "nope.jsonl")
