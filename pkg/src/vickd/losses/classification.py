from __future__ import annotations

from typing import Literal

import numpy as np

from ..errors import DataError, ShapeError
from ..tensor import Tensor, as_tensor, ops

Reduction = Literal["mean", "none"]


def _reduce(per_sample: Tensor, reduction: Reduction) -> Tensor:
    return ops.mean(per_sample) if reduction == "mean" else per_sample


def cross_entropy(logits: Tensor, labels: np.ndarray, reduction: Reduction = "mean") -> Tensor:
    """-log softmax(logits)[label], averaged over the batch by default."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs labels {labels.shape}")
    classes = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise DataError(f"cross_entropy: labels outside [0, {classes})")
    picked = ops.gather(ops.log_softmax(logits, axis=-1), labels[:, None])
    return _reduce(-ops.reshape(picked, (logits.shape[0],)), reduction)


def kl_div(
    p_logits: Tensor | np.ndarray,
    q_logits: Tensor | np.ndarray,
    temperature: float = 1.0,
    reduction: Reduction = "mean",
) -> Tensor:
    """KL(softmax(p/T) || softmax(q/T)) per sample, averaged by default.

    Pass the reference distribution (teacher, or the clean branch) as ``p``.
    """
    p_logits, q_logits = as_tensor(p_logits), as_tensor(q_logits)
    if p_logits.shape != q_logits.shape or p_logits.ndim != 2:
        raise ShapeError(f"kl_div: shapes {p_logits.shape} and {q_logits.shape}")
    inv_t = 1.0 / temperature
    log_p = ops.log_softmax(p_logits * inv_t, axis=-1)
    log_q = ops.log_softmax(q_logits * inv_t, axis=-1)
    per_sample = ops.sum(ops.exp(log_p) * (log_p - log_q), axis=-1)
    return _reduce(per_sample, reduction)


def accuracy(logits: Tensor | np.ndarray, labels: np.ndarray) -> float:
    data = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    labels = np.asarray(labels)
    if labels.size == 0:
        return 0.0
    return 100.0 * float(np.mean(data.argmax(axis=1) == labels))
