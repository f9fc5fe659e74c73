from __future__ import annotations

import hashlib

import numpy as np

from ..types import SplitSpec
from .dataset import Dataset

_BUCKETS = 10_000
_NOHASH = "_nohash_"


def split_key(item_id: str) -> str:
    """Speaker prefix for ``<cmd>/<speaker>_nohash_<n>.wav`` ids, else the id itself."""
    base = item_id.rsplit("/", 1)[-1]
    if _NOHASH in base:
        return base.split(_NOHASH, 1)[0]
    return item_id


def bucket(item_id: str) -> float:
    digest = hashlib.sha256(split_key(item_id).encode("utf-8")).hexdigest()
    return (int(digest[:8], 16) % _BUCKETS) / _BUCKETS


def assign(item_id: str, spec: SplitSpec) -> str:
    b = bucket(item_id)
    if b < spec.train:
        return "train"
    if b < spec.train + spec.valid:
        return "valid"
    return "test"


def split(ds: Dataset, spec: SplitSpec | None = None) -> tuple[Dataset, Dataset, Dataset]:
    """Deterministic hash split; an id (or speaker) always lands in the same part."""
    spec = spec or SplitSpec()
    parts = np.array([assign(i, spec) for i in ds.ids])
    return tuple(ds.subset(np.flatnonzero(parts == name)) for name in ("train", "valid", "test"))
