"""Experiment configuration: one root seed, named substreams, JSON config files.

Every random component (corpus synthesis, splitting, poison selection, weight
init, epoch shuffling) draws its seed from the root through a named
substream, so a config file plus `seed` pins the whole pipeline while any one
component can still be varied independently.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .audio import PaddingMode, TriggerSpec
from .corpus import PoisonPlan
from .features import FeatureConfig


class ConfigError(ValueError):
    """An experiment config file failed validation."""


SEED_SUBSTREAMS = {"corpus": 0, "split": 1, "poison": 2, "init": 3, "shuffle": 4}


def substream_seed(root_seed: int, name: str) -> int:
    """Stable 64-bit seed for one named component of the pipeline."""
    if name not in SEED_SUBSTREAMS:
        raise ValueError(f"unknown substream {name!r}; expected one of {sorted(SEED_SUBSTREAMS)}")
    if root_seed < 0:
        raise ValueError("root seed must be non-negative")
    seq = np.random.SeedSequence([int(root_seed), SEED_SUBSTREAMS[name]])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _check_keys(data: dict, allowed, section: str):
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {sorted(unknown)}")


@dataclass
class CorpusSection:
    num_speakers: int = 10
    utterances_per_speaker: int = 100
    duration_range_s: tuple = (0.9, 1.3)
    sample_rate: int = 16000

    @classmethod
    def from_dict(cls, data: dict) -> "CorpusSection":
        _check_keys(data, cls().__dict__, "corpus")
        section = cls(**data)
        section.duration_range_s = tuple(float(v) for v in section.duration_range_s)
        if section.num_speakers < 2:
            raise ConfigError("corpus.num_speakers must be >= 2")
        if section.utterances_per_speaker < 2:
            raise ConfigError("corpus.utterances_per_speaker must be >= 2")
        lo, hi = section.duration_range_s
        if not (0.5 <= lo <= hi <= 5.0):
            raise ConfigError("corpus.duration_range_s must satisfy 0.5 <= lo <= hi <= 5.0")
        if section.sample_rate < 8000:
            raise ConfigError("corpus.sample_rate must be >= 8000")
        return section


@dataclass
class SplitSection:
    train_fraction: float = 0.9

    @classmethod
    def from_dict(cls, data: dict) -> "SplitSection":
        _check_keys(data, cls().__dict__, "split")
        section = cls(**data)
        if not 0.0 < section.train_fraction < 1.0:
            raise ConfigError("split.train_fraction must lie in (0, 1)")
        return section


@dataclass
class PoisonSection:
    rate_percent: float = 10.0
    target_label: int = 0
    mode: str = "zero"
    trigger_len: int = 600
    exclude_target: bool = False

    @classmethod
    def from_dict(cls, data: dict) -> "PoisonSection":
        _check_keys(data, cls().__dict__, "poison")
        section = cls(**data)
        if not 0.0 < section.rate_percent < 100.0:
            raise ConfigError("poison.rate_percent must lie in (0, 100)")
        if section.target_label < 0:
            raise ConfigError("poison.target_label must be >= 0")
        PaddingMode.from_string(section.mode)
        if section.trigger_len < 1:
            raise ConfigError("poison.trigger_len must be >= 1")
        return section


@dataclass
class FeatureSection:
    frame_len: int = 400
    hop: int = 160
    fft_size: int = 512
    n_mels: int = 40
    log_floor: float = 1e-10

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureSection":
        _check_keys(data, cls().__dict__, "features")
        return cls(**data)


@dataclass
class TrainSection:
    hidden_dims: tuple = (128, 128)
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 0.005
    optimizer: str = "momentum"
    momentum: float = 0.9
    shuffle_each_epoch: bool = True

    @classmethod
    def from_dict(cls, data: dict) -> "TrainSection":
        _check_keys(data, cls().__dict__, "train")
        section = cls(**data)
        section.hidden_dims = tuple(int(d) for d in section.hidden_dims)
        if section.learning_rate <= 0:
            raise ConfigError("train.learning_rate must be positive")
        if section.batch_size < 1:
            raise ConfigError("train.batch_size must be >= 1")
        if section.epochs < 1:
            raise ConfigError("train.epochs must be >= 1")
        if section.optimizer not in ("sgd", "momentum"):
            raise ConfigError("train.optimizer must be 'sgd' or 'momentum'")
        if not section.hidden_dims:
            raise ConfigError("train.hidden_dims must be non-empty")
        return section


@dataclass
class ExperimentConfig:
    """All knobs for a reproducible gen/poison/train/eval pipeline."""

    seed: int = 0
    output_dir: str = "runs/experiment"
    corpus: CorpusSection = field(default_factory=CorpusSection)
    split: SplitSection = field(default_factory=SplitSection)
    poison: PoisonSection = field(default_factory=PoisonSection)
    features: FeatureSection = field(default_factory=FeatureSection)
    train: TrainSection = field(default_factory=TrainSection)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        _check_keys(
            data,
            ("seed", "output_dir", "corpus", "split", "poison", "features", "train"),
            "config",
        )
        config = cls(
            seed=int(data.get("seed", 0)),
            output_dir=str(data.get("output_dir", "runs/experiment")),
            corpus=CorpusSection.from_dict(dict(data.get("corpus", {}))),
            split=SplitSection.from_dict(dict(data.get("split", {}))),
            poison=PoisonSection.from_dict(dict(data.get("poison", {}))),
            features=FeatureSection.from_dict(dict(data.get("features", {}))),
            train=TrainSection.from_dict(dict(data.get("train", {}))),
        )
        if config.seed < 0:
            raise ConfigError("seed must be non-negative")
        if config.poison.target_label >= config.corpus.num_speakers:
            raise ConfigError("poison.target_label must be < corpus.num_speakers")
        return config

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"{path}: no such config file")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["corpus"]["duration_range_s"] = list(self.corpus.duration_range_s)
        data["train"]["hidden_dims"] = list(self.train.hidden_dims)
        return data

    # -- derived objects ---------------------------------------------------

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(
            frame_len=self.features.frame_len,
            hop=self.features.hop,
            fft_size=self.features.fft_size,
            n_mels=self.features.n_mels,
            log_floor=self.features.log_floor,
            sample_rate=self.corpus.sample_rate,
        )

    def trigger_spec(self) -> TriggerSpec:
        return TriggerSpec(
            PaddingMode.from_string(self.poison.mode), self.poison.trigger_len
        )

    def poison_plan(self) -> PoisonPlan:
        return PoisonPlan(
            rate_percent=self.poison.rate_percent,
            target_label=self.poison.target_label,
            trigger=self.trigger_spec(),
            seed=substream_seed(self.seed, "poison"),
            exclude_target=self.poison.exclude_target,
        )

    def classifier_params(self) -> dict:
        return {
            "hidden_dims": self.train.hidden_dims,
            "epochs": self.train.epochs,
            "batch_size": self.train.batch_size,
            "learning_rate": self.train.learning_rate,
            "optimizer": self.train.optimizer,
            "momentum": self.train.momentum,
            "seed": substream_seed(self.seed, "init"),
            "shuffle_seed": substream_seed(self.seed, "shuffle"),
            "shuffle_each_epoch": self.train.shuffle_each_epoch,
        }

    def corpus_seed(self) -> int:
        return substream_seed(self.seed, "corpus")

    def split_seed(self) -> int:
        return substream_seed(self.seed, "split")
