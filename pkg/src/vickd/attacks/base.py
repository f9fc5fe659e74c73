"""Shared pieces of the white-box attacks: input gradients and projection."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import NumericError
from ..losses import cross_entropy, kl_div
from ..tensor import Tensor, grad, ops

Model = Callable[[Tensor], Tensor]
# (logits, target) -> per-sample loss of shape (batch,)
LossFn = Callable[[Tensor, np.ndarray], Tensor]

RANGE = (-1.0, 1.0)


def ce_per_sample(logits: Tensor, labels: np.ndarray) -> Tensor:
    return cross_entropy(logits, labels, reduction="none")


def kl_per_sample(logits: Tensor, reference: np.ndarray) -> Tensor:
    """KL(softmax(reference) || softmax(logits)), the TRADES and RSLAD inner objective."""
    return kl_div(reference, logits, reduction="none")


def project(x_adv: np.ndarray, x: np.ndarray, eps: float) -> np.ndarray:
    """Clip into the l-inf ball around ``x`` and then into the valid range."""
    out = np.minimum(np.maximum(x_adv, x - eps), x + eps)
    return np.clip(out, *RANGE).astype(x.dtype)


def uniform_start(x: np.ndarray, eps: float, rng: np.random.Generator) -> np.ndarray:
    return project(x + rng.uniform(-eps, eps, size=x.shape).astype(x.dtype), x, eps)


def loss_and_grad(
    model: Model, x: np.ndarray, target: np.ndarray, loss_fn: LossFn, op: str
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-sample loss, its gradient w.r.t. the input, and the logits at ``x``."""
    xt = Tensor(x, requires_grad=True, dtype=x.dtype)
    logits = model(xt)
    per_sample = loss_fn(logits, target)
    (g,) = grad(ops.sum(per_sample), [xt])
    if not np.isfinite(g).all():
        raise NumericError(f"{op}: non-finite input gradient")
    return per_sample.data.copy(), g, logits.data.copy()


def keep_better(
    best: np.ndarray, best_key: np.ndarray, cand: np.ndarray, cand_key: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per sample, keep whichever point has the larger key."""
    take = cand_key > best_key
    best = best.copy()
    best[take] = cand[take]
    return best, np.where(take, cand_key, best_key)
