from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import DataError, FormatError
from ..models.checkpoint import read_tensors, sidecar_path, write_tensors

log = logging.getLogger("vickd.data")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Fixed-length waveforms (N, L) in [-1, 1] with integer labels.

    Arrays are made read-only at construction.
    """

    x: np.ndarray
    y: np.ndarray
    ids: tuple[str, ...]
    class_names: tuple[str, ...]
    sample_rate: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=np.float32)
        y = np.array(self.y, dtype=np.int64)
        if x.ndim != 2 or y.shape != (x.shape[0],) or len(self.ids) != x.shape[0]:
            raise DataError(f"dataset arrays disagree: x {x.shape}, y {y.shape}, {len(self.ids)} ids")
        if y.size and (y.min() < 0 or y.max() >= len(self.class_names)):
            raise DataError("dataset labels outside the class list")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "class_names", tuple(self.class_names))

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def length(self) -> int:
        return self.x.shape[1]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def subset(self, indices: Sequence[int] | np.ndarray) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            x=self.x[idx],
            y=self.y[idx],
            ids=tuple(self.ids[i] for i in idx),
            class_names=self.class_names,
            sample_rate=self.sample_rate,
            meta=dict(self.meta),
        )

    def head(self, n: int | None) -> "Dataset":
        return self if n is None or n >= len(self) else self.subset(np.arange(n))

    def histogram(self) -> dict[str, int]:
        counts = np.bincount(self.y, minlength=self.num_classes)
        return {name: int(c) for name, c in zip(self.class_names, counts)}


def save_dataset(ds: Dataset, path: Path) -> Path:
    """Tensor container with ``x`` and ``y`` plus a JSON sidecar for the rest."""
    path = write_tensors(path, {"x": ds.x, "y": ds.y.astype(np.float32)})
    record = {
        "ids": list(ds.ids),
        "class_names": list(ds.class_names),
        "sample_rate": ds.sample_rate,
        "meta": ds.meta,
    }
    sidecar_path(path).write_text(json.dumps(record))
    log.info("cached %d items (%d classes) to %s", len(ds), ds.num_classes, path)
    return path


def load_dataset(path: Path) -> Dataset:
    tensors = read_tensors(path)
    if set(tensors) != {"x", "y"}:
        raise FormatError(f"{path}: expected tensors x and y, found {sorted(tensors)}")
    try:
        record = json.loads(sidecar_path(path).read_text())
    except FileNotFoundError:
        raise FormatError(f"{path}: missing dataset sidecar") from None
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid dataset sidecar: {e}") from e
    return Dataset(
        x=tensors["x"],
        y=tensors["y"].astype(np.int64),
        ids=tuple(record["ids"]),
        class_names=tuple(record["class_names"]),
        sample_rate=int(record["sample_rate"]),
        meta=record.get("meta", {}),
    )
