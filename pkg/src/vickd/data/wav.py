"""RIFF/WAVE PCM 16-bit mono codec and the Speech-Commands directory loader."""

from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np

from ..errors import DataError, FormatError
from ..types import LabelScheme
from .dataset import Dataset

log = logging.getLogger("vickd.data")

WAVE_FORMAT_PCM = 0x0001
BACKGROUND_DIR = "_background_noise_"

V12_COMMANDS = ("yes", "no", "up", "down", "left", "right", "on", "off", "stop", "go")
V12_CLASSES = V12_COMMANDS + ("unknown", "silence")
V35_COMMANDS = (
    "backward", "bed", "bird", "cat", "dog", "down", "eight", "five", "follow", "forward",
    "four", "go", "happy", "house", "learn", "left", "marvin", "nine", "no", "off", "on",
    "one", "right", "seven", "sheila", "six", "stop", "three", "tree", "two", "up", "visual",
    "wow", "yes", "zero",
)


def parse_wav(buf: bytes, name: str = "<bytes>") -> tuple[np.ndarray, int]:
    """Decode a PCM 16-bit mono WAV into floats in [-1, 1) and its sample rate."""
    if len(buf) < 12 or buf[:4] != b"RIFF" or buf[8:12] != b"WAVE":
        raise FormatError(f"{name}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    data = None
    while pos + 8 <= len(buf):
        chunk_id, size = struct.unpack_from("<4sI", buf, pos)
        body = buf[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise FormatError(f"{name}: truncated {chunk_id!r} chunk")
        if chunk_id == b"fmt ":
            if size < 16:
                raise FormatError(f"{name}: fmt chunk too short ({size} bytes)")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            data = body
        pos += 8 + size + (size & 1)
    if fmt is None or data is None:
        raise FormatError(f"{name}: missing {'fmt' if fmt is None else 'data'} chunk")
    tag, channels, rate, _, _, bits = fmt
    if tag != WAVE_FORMAT_PCM:
        raise FormatError(f"{name}: unsupported format tag {tag:#06x}, only PCM")
    if channels != 1:
        raise FormatError(f"{name}: {channels} channels, only mono is supported")
    if bits != 16:
        raise FormatError(f"{name}: {bits}-bit samples, only 16-bit is supported")
    if len(data) % 2:
        raise FormatError(f"{name}: odd-sized 16-bit data chunk")
    samples = np.frombuffer(data, dtype="<i2").astype(np.float32) / 32768.0
    return samples, rate


def encode_wav(samples: np.ndarray, sample_rate: int) -> bytes:
    """PCM 16-bit mono; floats are scaled by 32768 and clipped to the int16 range."""
    pcm = np.clip(np.round(np.asarray(samples, dtype=np.float64) * 32768.0), -32768, 32767)
    data = pcm.astype("<i2").tobytes()
    fmt = struct.pack("<HHIIHH", WAVE_FORMAT_PCM, 1, sample_rate, sample_rate * 2, 2, 16)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(data)) + data
    return b"RIFF" + struct.pack("<I", len(body)) + body


def read_wav(path: Path) -> tuple[np.ndarray, int]:
    return parse_wav(Path(path).read_bytes(), name=str(path))


def write_wav(path: Path, samples: np.ndarray, sample_rate: int) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_wav(samples, sample_rate))
    return path


def _resample(x: np.ndarray, rate: int, target: int) -> np.ndarray:
    if rate == target:
        return x
    n = int(round(len(x) * target / rate))
    return np.interp(np.arange(n) * (rate / target), np.arange(len(x)), x).astype(np.float32)


def _pad_or_trim(x: np.ndarray, length: int) -> np.ndarray:
    """Zero-pad at the end or keep the first ``length`` samples."""
    if len(x) >= length:
        return x[:length]
    return np.pad(x, (0, length - len(x)))


def _load_files(files: list[Path], sample_rate: int, length: int) -> list[np.ndarray]:
    out = []
    for f in files:
        samples, rate = read_wav(f)
        out.append(_pad_or_trim(_resample(samples, rate, sample_rate), length))
    return out


def _background_windows(root: Path, sample_rate: int, length: int) -> list[tuple[str, np.ndarray]]:
    windows = []
    for f in sorted((root / BACKGROUND_DIR).glob("*.wav")):
        samples, rate = read_wav(f)
        samples = _resample(samples, rate, sample_rate)
        for i in range(len(samples) // length):
            windows.append((f"{BACKGROUND_DIR}/{f.stem}_win{i:04d}", samples[i * length:(i + 1) * length]))
    return windows


def load_wav_dir(
    root: Path,
    scheme: LabelScheme = LabelScheme.v12,
    sample_rate: int = 16000,
    length: int = 16000,
    seed: int = 0,
) -> Dataset:
    """Load ``<root>/<command>/<file>.wav`` into a Dataset under ``scheme``.

    V12 keeps the ten commands, folds every other command into ``unknown``
    (uniformly subsampled to the mean command count) and cuts ``silence``
    windows from the background-noise folder (capped at the same count).
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"{root}: not a directory")
    commands = {
        d.name: sorted(d.glob("*.wav"))
        for d in sorted(root.iterdir())
        if d.is_dir() and d.name != BACKGROUND_DIR
    }
    rng = np.random.default_rng(seed)
    items: list[tuple[str, int, np.ndarray]] = []

    if scheme == LabelScheme.v35:
        class_names = V35_COMMANDS
        for label, name in enumerate(class_names):
            files = commands.get(name, [])
            if not files:
                raise DataError(f"{root}: class {name!r} is empty")
            for f, x in zip(files, _load_files(files, sample_rate, length)):
                items.append((f"{name}/{f.name}", label, x))
    else:
        class_names = V12_CLASSES
        for label, name in enumerate(V12_COMMANDS):
            files = commands.get(name, [])
            if not files:
                raise DataError(f"{root}: class {name!r} is empty")
            for f, x in zip(files, _load_files(files, sample_rate, length)):
                items.append((f"{name}/{f.name}", label, x))
        target = int(round(len(items) / len(V12_COMMANDS)))
        pool = [(name, f) for name, files in commands.items() if name not in V12_COMMANDS for f in files]
        if not pool:
            raise DataError(f"{root}: class 'unknown' is empty (no unused commands)")
        picks = rng.choice(len(pool), size=min(target, len(pool)), replace=False)
        chosen = [pool[i] for i in sorted(picks)]
        unknown_label = class_names.index("unknown")
        for (name, f), x in zip(chosen, _load_files([f for _, f in chosen], sample_rate, length)):
            items.append((f"{name}/{f.name}", unknown_label, x))
        windows = _background_windows(root, sample_rate, length)
        if not windows:
            raise DataError(f"{root}: class 'silence' is empty (no {BACKGROUND_DIR} audio)")
        if len(windows) > target:
            windows = [windows[i] for i in sorted(rng.choice(len(windows), size=target, replace=False))]
        silence_label = class_names.index("silence")
        items.extend((wid, silence_label, x) for wid, x in windows)

    log.info("loaded %d utterances from %s (%s)", len(items), root, scheme.value)
    return Dataset(
        x=np.stack([np.clip(x, -1.0, 1.0) for _, _, x in items]),
        y=np.array([label for _, label, _ in items]),
        ids=tuple(i for i, _, _ in items),
        class_names=class_names,
        sample_rate=sample_rate,
        meta={"source": "wav", "root": str(root), "scheme": scheme.value},
    )
