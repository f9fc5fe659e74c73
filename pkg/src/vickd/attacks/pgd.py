from __future__ import annotations

import logging

import numpy as np

from ..types import AttackSpec
from .base import LossFn, Model, ce_per_sample, keep_better, loss_and_grad, project, uniform_start

log = logging.getLogger("vickd.attacks")


def fgsm(model: Model, x: np.ndarray, y: np.ndarray, spec: AttackSpec) -> np.ndarray:
    """One signed-gradient step of size epsilon on the CE loss."""
    _, g, _ = loss_and_grad(model, x, y, ce_per_sample, "fgsm")
    return project(x + spec.epsilon * np.sign(g).astype(x.dtype), x, spec.epsilon)


def _pgd_run(
    model: Model,
    x: np.ndarray,
    target: np.ndarray,
    spec: AttackSpec,
    loss_fn: LossFn,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    eps = spec.epsilon
    x_adv = uniform_start(x, eps, rng) if spec.random_init else x.copy()
    if spec.steps == 0:
        loss, _, _ = loss_and_grad(model, x_adv, target, loss_fn, "pgd")
        return x_adv, loss
    best, best_loss = x_adv, np.full(len(x), -np.inf)
    _, g, _ = loss_and_grad(model, x_adv, target, loss_fn, "pgd")
    for step in range(spec.steps):
        x_adv = project(x_adv + spec.step_size * np.sign(g).astype(x.dtype), x, eps)
        loss, g, _ = loss_and_grad(model, x_adv, target, loss_fn, "pgd")
        best, best_loss = keep_better(best, best_loss, x_adv, loss)
        log.debug("pgd step %d mean loss %.4f", step, float(loss.mean()))
    return best, best_loss


def pgd(
    model: Model,
    x: np.ndarray,
    y: np.ndarray,
    spec: AttackSpec,
    loss_fn: LossFn | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Signed-gradient ascent with projection, returning the best-loss iterate.

    ``y`` is whatever ``loss_fn`` takes as its target: labels for the default
    CE loss, reference logits for KL-based inner maximization.
    """
    loss_fn = loss_fn or ce_per_sample
    rng = rng or np.random.default_rng(0)
    best, best_loss = _pgd_run(model, x, y, spec, loss_fn, rng)
    for _ in range(1, max(spec.restarts, 1)):
        cand, cand_loss = _pgd_run(model, x, y, spec, loss_fn, rng)
        best, best_loss = keep_better(best, best_loss, cand, cand_loss)
    return best
