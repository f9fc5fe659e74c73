"""Binary tensor container used for checkpoints and dataset caches.

Layout (little-endian):
    magic    8 bytes  b"VICKD001"
    version  u32
    count    u32
    per tensor:
        name_len u32, name (utf-8), rank u32, dims (u32 each), f32 payload

A ``<file>.json`` sidecar carries what the binary layout has no room for
(model architecture, training metadata).
"""

from __future__ import annotations

import json
import logging
import math
import struct
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import FormatError
from ..types import ModelSpec
from .layers import Module

log = logging.getLogger("vickd.models")

MAGIC = b"VICKD001"
VERSION = 1
_U32 = struct.Struct("<I")
_MAX_RANK = 8
_MAX_U32 = 0xFFFFFFFF


def encode_tensors(tensors: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, _U32.pack(VERSION), _U32.pack(len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        if arr.ndim > _MAX_RANK or any(d > _MAX_U32 for d in arr.shape):
            raise FormatError(f"{name}: shape {arr.shape} does not fit the container")
        raw = name.encode("utf-8")
        parts.append(_U32.pack(len(raw)))
        parts.append(raw)
        parts.append(_U32.pack(arr.ndim))
        parts.extend(_U32.pack(d) for d in arr.shape)
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(f"truncated container while reading {what} at byte {self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]


def decode_tensors(buf: bytes) -> dict[str, np.ndarray]:
    r = _Reader(buf)
    magic = r.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version = r.u32("version")
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    count = r.u32("tensor count")
    out: dict[str, np.ndarray] = {}
    for i in range(count):
        name_len = r.u32(f"name length of tensor {i}")
        try:
            name = r.take(name_len, f"name of tensor {i}").decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"tensor {i}: name is not utf-8") from e
        rank = r.u32(f"rank of {name}")
        if rank > _MAX_RANK:
            raise FormatError(f"{name}: rank {rank} exceeds {_MAX_RANK}")
        dims = tuple(r.u32(f"dims of {name}") for _ in range(rank))
        n = math.prod(dims)
        if n * 4 > len(buf) - r.pos:
            raise FormatError(f"{name}: dims {dims} overflow the remaining {len(buf) - r.pos} bytes")
        payload = r.take(n * 4, f"payload of {name}")
        out[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
    if r.pos != len(buf):
        raise FormatError(f"{len(buf) - r.pos} trailing bytes after {count} tensors")
    return out


def write_tensors(path: Path, tensors: dict[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_tensors(tensors))
    return path


def read_tensors(path: Path) -> dict[str, np.ndarray]:
    try:
        buf = Path(path).read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e}") from e
    return decode_tensors(buf)


def sidecar_path(path: Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def save_checkpoint(model: Module, path: Path, meta: dict[str, Any] | None = None) -> Path:
    """Write the model's parameters and an architecture sidecar."""
    path = write_tensors(path, model.state_dict())
    record = {"model": model.spec.model_dump(mode="json"), "meta": meta or {}}
    sidecar_path(path).write_text(json.dumps(record, indent=2, sort_keys=True))
    log.debug("saved %s (%d params)", path, model.num_parameters())
    return path


def read_sidecar(path: Path) -> dict[str, Any]:
    side = sidecar_path(path)
    try:
        return json.loads(side.read_text())
    except FileNotFoundError:
        raise FormatError(f"{path}: missing architecture sidecar {side.name}") from None
    except json.JSONDecodeError as e:
        raise FormatError(f"{side}: invalid JSON: {e}") from e


def load_checkpoint(path: Path) -> Module:
    """Rebuild the model recorded in the sidecar and load its parameters."""
    from .student import build_model

    record = read_sidecar(path)
    model = build_model(ModelSpec.model_validate(record["model"]))
    state = read_tensors(path)
    try:
        model.load_state_dict(state)
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from e
    return model


def checkpoint_meta(path: Path) -> dict[str, Any]:
    return read_sidecar(path).get("meta", {})
