"""Auto-PGD (l-inf): momentum steps with step-size halving at checkpoints.

The checkpoint schedule, momentum 0.75 and the initial step of 2*epsilon
follow the reference AutoAttack implementation. APGD-T runs the targeted
DLR loss once per target taken from the top of the clean logits.
"""

from __future__ import annotations

import logging
from typing import Callable

import numpy as np

from ..tensor import Tensor, ops
from ..types import AttackSpec
from .base import Model, ce_per_sample, loss_and_grad, project

log = logging.getLogger("vickd.attacks")

MOMENTUM = 0.75
OSCILLATION_THRESHOLD = 0.75
FIRST_CHECKPOINT = 0.22
MIN_CHECKPOINT = 0.06
CHECKPOINT_DECREMENT = 0.03


def _sorted_logits(logits: Tensor) -> Tensor:
    order = np.argsort(logits.data, axis=1, kind="stable")
    return ops.gather(logits, order)


def dlr_targeted_per_sample(logits: Tensor, y: np.ndarray, target: np.ndarray) -> Tensor:
    """-(z_y - z_t) / (z_1st - (z_3rd + z_4th)/2), smaller classes fall back to z_1st - z_last."""
    n, c = logits.shape
    z_y = ops.gather(logits, np.asarray(y)[:, None])
    z_t = ops.gather(logits, np.asarray(target)[:, None])
    s = _sorted_logits(logits)
    if c >= 4:
        denom = s[:, c - 1:c] - (s[:, c - 3:c - 2] + s[:, c - 4:c - 3]) * 0.5
    else:
        denom = s[:, c - 1:c] - s[:, 0:1]
    per = -(z_y - z_t) / (denom + 1e-12)
    return ops.reshape(per, (n,))


def _oscillating(loss_steps: np.ndarray, row: int, k: int) -> np.ndarray:
    """True where the loss increased in at most 75% of the last ``k`` steps."""
    ups = np.zeros(loss_steps.shape[1])
    for back in range(k):
        ups += loss_steps[row - back] > loss_steps[row - back - 1]
    return ups <= k * OSCILLATION_THRESHOLD


def _apgd_run(
    objective: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]],
    x: np.ndarray,
    y: np.ndarray,
    spec: AttackSpec,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One APGD run; returns (point, best loss, fooled).

    The point is the first iterate that fooled the model where one exists,
    otherwise the highest-loss iterate.
    """
    eps, n_iter, n = spec.epsilon, spec.steps, len(x)
    k = max(int(FIRST_CHECKPOINT * n_iter), 1)
    k_min = max(int(MIN_CHECKPOINT * n_iter), 1)
    k_decr = max(int(CHECKPOINT_DECREMENT * n_iter), 1)
    bshape = (n,) + (1,) * (x.ndim - 1)

    if spec.random_init:
        t = rng.uniform(-1.0, 1.0, size=x.shape)
        t /= np.abs(t).reshape(n, -1).max(axis=1).reshape(bshape) + 1e-12
        x_adv = project(x + (eps * t).astype(x.dtype), x, eps)
    else:
        x_adv = x.copy()

    loss, g, logits = objective(x_adv)
    fooled = logits.argmax(axis=1) != y
    x_fool = x_adv.copy()
    x_best, loss_best, g_best = x_adv.copy(), loss.copy(), g.copy()
    if n_iter == 0:
        return x_fool, loss_best, fooled

    step = np.full(bshape, spec.step_size, dtype=np.float64)
    loss_steps = np.zeros((n_iter + 1, n))
    loss_steps[0] = loss
    loss_best_last = loss_best.copy()
    reduced_last = np.ones(n, dtype=bool)
    x_old = x_adv.copy()
    since_check = 0

    for i in range(n_iter):
        momentum_in = x_adv - x_old
        x_old = x_adv.copy()
        a = MOMENTUM if i > 0 else 1.0
        z = project(x_adv + (step * np.sign(g)).astype(x.dtype), x, eps)
        x_adv = project(x_adv + (z - x_adv) * a + momentum_in * (1 - a), x, eps)

        loss, g, logits = objective(x_adv)
        newly = (logits.argmax(axis=1) != y) & ~fooled
        x_fool[newly] = x_adv[newly]
        fooled |= newly
        loss_steps[i + 1] = loss
        better = loss > loss_best
        x_best[better], g_best[better], loss_best[better] = x_adv[better], g[better], loss[better]

        since_check += 1
        if since_check == k:
            halve = _oscillating(loss_steps, i + 1, k)
            halve |= ~reduced_last & (loss_best_last >= loss_best)
            reduced_last = halve.copy()
            loss_best_last = loss_best.copy()
            if halve.any():
                step[halve] /= 2.0
                x_adv[halve] = x_best[halve]
                g[halve] = g_best[halve]
            log.debug("apgd iter %d: halved step on %d/%d samples", i, int(halve.sum()), n)
            k = max(k - k_decr, k_min)
            since_check = 0
    return np.where(fooled.reshape(bshape), x_fool, x_best), loss_best, fooled


def _merge(
    best: tuple[np.ndarray, np.ndarray, np.ndarray],
    cand: tuple[np.ndarray, np.ndarray, np.ndarray],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Prefer points that fooled the model, then the larger loss."""
    bx, bl, bf = best
    cx, cl, cf = cand
    take = (cf & ~bf) | ((cf == bf) & (cl > bl))
    bx = bx.copy()
    bx[take] = cx[take]
    return bx, np.where(take, cl, bl), bf | cf


def apgd(
    model: Model,
    x: np.ndarray,
    y: np.ndarray,
    spec: AttackSpec,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """APGD on the CE loss."""
    rng = rng or np.random.default_rng(0)

    def objective(xa: np.ndarray):
        return loss_and_grad(model, xa, y, ce_per_sample, "apgd")

    best = _apgd_run(objective, x, y, spec, rng)
    for _ in range(1, max(spec.restarts, 1)):
        best = _merge(best, _apgd_run(objective, x, y, spec, rng))
    return best[0]


def apgd_targeted(
    model: Model,
    x: np.ndarray,
    y: np.ndarray,
    spec: AttackSpec,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """APGD on the targeted DLR loss, once per top-ranked wrong class."""
    rng = rng or np.random.default_rng(0)
    clean_logits = model(Tensor(x, dtype=x.dtype)).data
    classes = clean_logits.shape[1]
    ranking = np.argsort(clean_logits, axis=1, kind="stable")
    best = None
    for rank in range(2, min(spec.targeted_classes, classes - 1) + 2):
        target = ranking[:, -rank]

        def objective(xa: np.ndarray, target=target):
            return loss_and_grad(
                model, xa, y, lambda lg, yy: dlr_targeted_per_sample(lg, yy, target), "apgd_t"
            )

        for _ in range(max(spec.restarts, 1)):
            run = _apgd_run(objective, x, y, spec, rng)
            best = run if best is None else _merge(best, run)
    return best[0]
