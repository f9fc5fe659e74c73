"""Plumbing shared by the pipeline stages: datasets, seeds and run directories."""

from __future__ import annotations

import hashlib
import json
import logging
from functools import lru_cache
from pathlib import Path

import numpy as np

from ..data import Dataset, load_dataset, load_wav_dir, split, synth_dataset
from ..errors import ConfigError
from ..models import Module, load_checkpoint
from ..tensor import no_grad
from ..types import DataSource, DatasetSpec, EpochRecord, ExperimentConfig, LabelScheme, Profile

log = logging.getLogger("vickd.pipeline")


def derive_seed(seed: int, name: str) -> int:
    """Independent 31-bit seed for a named grid cell."""
    digest = hashlib.sha256(f"{seed}:{name}".encode("utf-8")).hexdigest()
    return int(digest[:8], 16) & 0x7FFFFFFF


def dataset_seed(config: ExperimentConfig) -> int:
    return config.dataset.seed if config.dataset.seed is not None else config.seed


@lru_cache(maxsize=8)
def _load(spec_json: str, seed: int, profile: str) -> Dataset:
    spec = DatasetSpec.model_validate_json(spec_json)
    if spec.source == DataSource.synth:
        return synth_dataset(
            spec.classes,
            spec.per_class,
            seed=seed,
            profile=Profile(profile),
            scheme=spec.scheme,
            sample_rate=spec.sample_rate,
            length=spec.length,
        )
    if spec.path is None:
        raise ConfigError(f"dataset.source={spec.source.value} needs dataset.path")
    if spec.source == DataSource.wav:
        return load_wav_dir(
            spec.path,
            scheme=spec.scheme or LabelScheme.v12,
            sample_rate=spec.sample_rate,
            length=spec.length,
            seed=seed,
        )
    return load_dataset(spec.path)


def load_data(config: ExperimentConfig) -> Dataset:
    """The full dataset a config describes; cached per (dataset spec, seed)."""
    return _load(config.dataset.model_dump_json(), dataset_seed(config), config.profile.value)


def prepare_data(config: ExperimentConfig) -> tuple[Dataset, Dataset, Dataset]:
    """(train, valid, test) under the config's split fractions."""
    train, valid, test = split(load_data(config), config.split)
    if len(train) < 2 or len(test) == 0:
        raise ConfigError(
            f"split left {len(train)} train and {len(test)} test items; raise dataset.per_class"
        )
    log.debug("split %d/%d/%d", len(train), len(valid), len(test))
    return train, valid, test


def run_dir(config: ExperimentConfig, stage: str) -> Path:
    path = Path(config.output_dir) / config.name / stage
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_history(path: Path, history: list[EpochRecord]) -> Path:
    path.write_text(json.dumps([r.model_dump() for r in history], indent=2))
    return path


def load_frozen(path: Path) -> Module:
    model = load_checkpoint(path)
    for p in model.parameters():
        p.requires_grad = False
    return model


def logits_of(model, x: np.ndarray) -> np.ndarray:
    """Logits as a plain array, outside the graph."""
    with no_grad():
        return model.logits(x).data.copy()
