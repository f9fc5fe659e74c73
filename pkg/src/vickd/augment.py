"""Waveform transforms for the multi-view recipes and two-view sampling.

Every transform is a pure function of (waveform, rng): same length out as
in, amplitude clipped to [-1, 1].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, ShapeError
from .types import TransformKind

log = logging.getLogger("vickd.augment")

SNR_RANGE_DB = (0.0, 15.0)
RT60_RANGE_S = (0.3, 0.9)
IR_SECONDS = 0.25
DROP_FRACTION = (0.0625, 0.25)
SPEED_FACTORS = (0.9, 1.0, 1.1)


def _clip(x: np.ndarray) -> np.ndarray:
    return np.clip(x, -1.0, 1.0).astype(np.float32)


def _power(x: np.ndarray) -> float:
    return float(np.mean(np.square(x, dtype=np.float64)))


def fit_length(x: np.ndarray, length: int) -> np.ndarray:
    """Center-crop or zero-pad (both sides) to ``length`` samples."""
    n = x.shape[-1]
    if n == length:
        return x
    if n > length:
        start = (n - length) // 2
        return x[start:start + length]
    left = (length - n) // 2
    return np.pad(x, (left, length - n - left))


def add_noise(x: np.ndarray, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """White Gaussian noise scaled so the signal-to-noise ratio is ``snr_db``.

    A mixture that would leave [-1, 1] is peak-normalized rather than clipped,
    so signal and noise shrink together and the ratio holds.
    """
    p_signal = _power(x)
    if p_signal == 0.0:
        return x.copy()
    noise = rng.standard_normal(x.shape[-1])
    noise *= np.sqrt(p_signal / 10 ** (snr_db / 10) / _power(noise))
    mixed = x + noise
    peak = float(np.max(np.abs(mixed)))
    if peak > 1.0:
        mixed /= peak
    return _clip(mixed)


def impulse_response(rt60: float, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
    k = np.arange(int(IR_SECONDS * sample_rate))
    h = rng.standard_normal(k.size) * np.exp(-3.0 * k * np.log(10.0) / (rt60 * sample_rate))
    return h / np.max(np.abs(h))


def add_reverb(x: np.ndarray, rt60: float, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
    h = impulse_response(rt60, sample_rate, rng)
    y = np.convolve(x, h)[: x.shape[-1]]
    rms_in, rms_out = np.sqrt(_power(x)), np.sqrt(_power(y))
    if rms_out > 0.0:
        y = y * (rms_in / rms_out)
    return _clip(y)


def drop_chunk(x: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[-1]
    span = min(max(int(round(fraction * n)), 1), n)
    start = int(rng.integers(0, n - span + 1))
    out = x.copy()
    out[start:start + span] = 0.0
    return _clip(out)


def change_speed(x: np.ndarray, factor: float) -> np.ndarray:
    """Linear-interpolation resample by ``factor``, back to the input length."""
    if factor == 1.0:
        return x.copy()
    n = x.shape[-1]
    positions = np.arange(int(round(n / factor))) * factor
    y = np.interp(positions, np.arange(n), x)
    return _clip(fit_length(y, n))


def _noise(x, rng, sr):
    return add_noise(x, rng.uniform(*SNR_RANGE_DB), rng)


def _reverb(x, rng, sr):
    return add_reverb(x, rng.uniform(*RT60_RANGE_S), sr, rng)


def _noise_reverb(x, rng, sr):
    return _noise(_reverb(x, rng, sr), rng, sr)


TRANSFORMS: dict[TransformKind, Callable[[np.ndarray, np.random.Generator, int], np.ndarray]] = {
    TransformKind.clean: lambda x, rng, sr: x.copy(),
    TransformKind.noise: _noise,
    TransformKind.reverb: _reverb,
    TransformKind.noise_reverb: _noise_reverb,
    TransformKind.chunk_drop: lambda x, rng, sr: drop_chunk(x, rng.uniform(*DROP_FRACTION), rng),
    TransformKind.speed_perturb: lambda x, rng, sr: change_speed(x, float(rng.choice(SPEED_FACTORS))),
}


def apply(kind: TransformKind, x: np.ndarray, rng: np.random.Generator, sample_rate: int = 4000) -> np.ndarray:
    if x.ndim != 1:
        raise ShapeError(f"apply({kind.value}): expected a 1-d waveform, got shape {x.shape}")
    return TRANSFORMS[kind](np.asarray(x, dtype=np.float32), rng, sample_rate)


@dataclass
class ViewPair:
    view_t: np.ndarray
    view_t_prime: np.ndarray
    kinds: tuple[TransformKind, TransformKind]


@dataclass
class ViewBatch:
    """Stacked views for a batch: ``view_t`` feeds the teacher, ``view_t_prime`` the student."""

    view_t: np.ndarray
    view_t_prime: np.ndarray
    kinds: list[tuple[TransformKind, TransformKind]] = field(default_factory=list)

    @classmethod
    def identical(cls, x: np.ndarray) -> "ViewBatch":
        """Single-view input: both branches see ``x``."""
        pair = (TransformKind.clean, TransformKind.clean)
        return cls(x, x, [pair] * len(x))


def sample_view_pair(
    x: np.ndarray,
    rng: np.random.Generator,
    kinds: Sequence[TransformKind] = tuple(TransformKind),
    sample_rate: int = 4000,
) -> ViewPair:
    """Draw t != t' uniformly without replacement and apply both to ``x``."""
    kinds = list(kinds)
    if len(kinds) < 2:
        raise ConfigError(f"multi-view needs at least 2 transform kinds, got {len(kinds)}")
    i, j = rng.choice(len(kinds), size=2, replace=False)
    t, t_prime = kinds[int(i)], kinds[int(j)]
    return ViewPair(
        view_t=apply(t, x, rng, sample_rate),
        view_t_prime=apply(t_prime, x, rng, sample_rate),
        kinds=(t, t_prime),
    )


def sample_view_batch(
    x: np.ndarray,
    indices: Sequence[int],
    seed: int,
    epoch: int,
    kinds: Sequence[TransformKind] = tuple(TransformKind),
    sample_rate: int = 4000,
) -> ViewBatch:
    """Per-sample view pairs, each from its own (seed, epoch, index) stream."""
    pairs = [
        sample_view_pair(row, np.random.default_rng([seed, epoch, int(idx)]), kinds, sample_rate)
        for row, idx in zip(x, indices)
    ]
    log.debug("sampled %d view pairs for epoch %d", len(pairs), epoch)
    return ViewBatch(
        view_t=np.stack([p.view_t for p in pairs]),
        view_t_prime=np.stack([p.view_t_prime for p in pairs]),
        kinds=[p.kinds for p in pairs],
    )
