"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

import logging
from typing import Callable, Sequence

import numpy as np

from ..errors import ShapeError
from .core import Tensor, float64_mode, grad

log = logging.getLogger("vickd.tensor")


def _rel_error(a: np.ndarray, n: np.ndarray) -> float:
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12))


def gradcheck(
    fn: Callable[..., Tensor],
    inputs: Sequence[np.ndarray],
    *,
    step: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``fn`` must build a scalar from the given tensors. Everything runs in
    float64; the step for each coordinate is ``step * max(1, |x|)``.
    """
    with float64_mode():
        arrays = [np.array(a, dtype=np.float64) for a in inputs]
        tensors = [Tensor(a, requires_grad=True) for a in arrays]
        out = fn(*tensors)
        if out.size != 1:
            raise ShapeError(f"gradcheck: fn must return a scalar, got shape {out.shape}")
        analytic = grad(out, tensors)

        worst = 0.0
        for i, base in enumerate(arrays):
            numeric = np.zeros_like(base)
            it = np.nditer(base, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                h = step * max(1.0, abs(base[idx]))
                shifted = [a.copy() for a in arrays]
                shifted[i][idx] = base[idx] + h
                up = fn(*[Tensor(a) for a in shifted]).item()
                shifted[i][idx] = base[idx] - h
                down = fn(*[Tensor(a) for a in shifted]).item()
                numeric[idx] = (up - down) / (2 * h)
            err = _rel_error(analytic[i], numeric)
            log.debug("gradcheck input %d shape %s rel_error=%.3g", i, base.shape, err)
            worst = max(worst, err)
    return worst
