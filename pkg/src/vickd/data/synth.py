"""Synthetic keyword generator.

Each keyword class is a fixed triple of sinusoid frequencies with fixed
relative amplitudes. An utterance jitters every frequency by up to 5%,
shapes the mix with a random attack-decay envelope and adds a Gaussian
noise floor 30 dB below the signal. Under the 12-class scheme the last two
classes are ``unknown`` (drawn from distractor keywords) and ``silence``
(envelope-shaped noise with no tones).
"""

from __future__ import annotations

import itertools
import logging

import numpy as np

from ..errors import ConfigError
from ..types import LabelScheme, Profile
from .dataset import Dataset
from .wav import V12_CLASSES, V35_COMMANDS

log = logging.getLogger("vickd.data")

PROFILE_AUDIO = {Profile.desk: (4000, 2000), Profile.paper: (16000, 16000)}
FREQ_GRID_SIZE = 24
FREQ_JITTER = 0.05
NOISE_FLOOR_DB = 30.0
DISTRACTORS = 6


def _class_triples(count: int, sample_rate: int, seed: int) -> np.ndarray:
    """``count`` distinct frequency triples from a log-spaced grid below Nyquist."""
    grid = np.geomspace(150.0, 0.35 * sample_rate, FREQ_GRID_SIZE)
    combos = list(itertools.combinations(range(FREQ_GRID_SIZE), 3))
    if count > len(combos):
        raise ConfigError(f"synth_dataset: at most {len(combos)} classes, asked for {count}")
    rng = np.random.default_rng([seed, 0x5EED])
    picks = rng.choice(len(combos), size=count, replace=False)
    return np.array([grid[list(combos[i])] for i in picks])


def _envelope(length: int, rng: np.random.Generator) -> np.ndarray:
    onset = int(rng.uniform(0.0, 0.2) * length)
    attack = max(int(rng.uniform(0.05, 0.15) * length), 1)
    tau = rng.uniform(0.2, 0.5) * length
    t = np.arange(length, dtype=np.float64) - onset
    env = np.where(t < 0, 0.0, np.where(t < attack, t / attack, np.exp(-(t - attack) / tau)))
    return env


def _tone(freqs: np.ndarray, weights: np.ndarray, sample_rate: int, length: int, rng: np.random.Generator) -> np.ndarray:
    jitter = 1.0 + rng.uniform(-FREQ_JITTER, FREQ_JITTER, size=3)
    phase = rng.uniform(0.0, 2 * np.pi, size=3)
    t = np.arange(length) / sample_rate
    mix = (weights[:, None] * np.sin(2 * np.pi * (freqs * jitter)[:, None] * t + phase[:, None])).sum(axis=0)
    return mix / weights.sum()


def _with_floor(signal: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    power = float(np.mean(signal ** 2))
    floor = rng.standard_normal(signal.shape) * np.sqrt(power / 10 ** (NOISE_FLOOR_DB / 10))
    return signal + floor


def synth_dataset(
    classes: int,
    per_class: int,
    seed: int = 0,
    profile: Profile = Profile.desk,
    scheme: LabelScheme | None = None,
    sample_rate: int | None = None,
    length: int | None = None,
) -> Dataset:
    """Generate ``per_class`` utterances for each of ``classes`` keyword classes.

    ``sample_rate`` and ``length`` default to the profile's audio format.
    """
    if classes < 2:
        raise ConfigError(f"synth_dataset: need at least 2 classes, got {classes}")
    if scheme is None and classes == 12:
        scheme = LabelScheme.v12
    if scheme == LabelScheme.v12 and classes != 12:
        raise ConfigError(f"the v12 scheme has 12 classes, asked for {classes}")
    if scheme == LabelScheme.v35 and classes != 35:
        raise ConfigError(f"the v35 scheme has 35 classes, asked for {classes}")
    profile_rate, profile_length = PROFILE_AUDIO[Profile(profile)]
    sample_rate = sample_rate or profile_rate
    length = length or profile_length

    if scheme == LabelScheme.v12:
        names = V12_CLASSES
        keywords = 10
    elif scheme == LabelScheme.v35:
        names, keywords = V35_COMMANDS, 35
    else:
        names, keywords = tuple(f"kw{k:02d}" for k in range(classes)), classes
    distractors = DISTRACTORS if scheme == LabelScheme.v12 else 0
    triples = _class_triples(keywords + distractors, sample_rate, seed)
    weights = np.random.default_rng([seed, 0xA11]).uniform(0.5, 1.0, size=(len(triples), 3))

    xs, ys, ids = [], [], []
    for label, name in enumerate(names):
        for i in range(per_class):
            rng = np.random.default_rng([seed, label, i])
            amp = rng.uniform(0.3, 0.8)
            env = _envelope(length, rng)
            if name == "silence":
                wave = amp * 0.1 * env * rng.standard_normal(length)
            else:
                k = label if name != "unknown" else keywords + int(rng.integers(distractors))
                wave = _with_floor(amp * env * _tone(triples[k], weights[k], sample_rate, length, rng), rng)
            xs.append(np.clip(wave, -1.0, 1.0))
            ys.append(label)
            ids.append(f"{name}/synth{seed}_{i:05d}")
    log.info("synthesized %d utterances, %d classes, %d Hz x %d", len(xs), len(names), sample_rate, length)
    return Dataset(
        x=np.stack(xs),
        y=np.array(ys),
        ids=tuple(ids),
        class_names=tuple(names),
        sample_rate=sample_rate,
        meta={"source": "synth", "seed": seed, "profile": Profile(profile).value,
              "scheme": scheme.value if scheme else None},
    )
