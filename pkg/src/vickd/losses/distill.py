"""Logit-matching objectives: KD, ARD, RSLAD and TRADES.

Terms written KL(student || teacher) follow the usual implementation
convention: the teacher (or clean) distribution is the reference ``p`` of
``kl_div`` and the student (or adversarial) logits are ``q``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..tensor import Tensor, as_tensor, no_grad
from ..types import RecipeConfig
from .classification import cross_entropy, kl_div

Logits = Callable[[Tensor | np.ndarray], Tensor]


def _frozen(fn: Logits, x: Tensor | np.ndarray) -> Tensor:
    with no_grad():
        return fn(x).detach()


def kd_loss(student_logits: Tensor, teacher_logits: Tensor | np.ndarray, labels: np.ndarray, cfg: RecipeConfig) -> Tensor:
    """(1-w)*CE(student, labels) + w*T^2*KL(teacher/T || student/T)."""
    w, t = cfg.kd_weight, cfg.kd_temperature
    teacher_logits = as_tensor(teacher_logits).detach()
    soft = kl_div(teacher_logits, student_logits, t) * (t * t)
    return cross_entropy(student_logits, labels) * (1.0 - w) + soft * w


def ard_loss(
    model: Logits,
    teacher: Logits,
    x_clean: Tensor | np.ndarray,
    x_adv: Tensor | np.ndarray,
    labels: np.ndarray,
    cfg: RecipeConfig,
    x_teacher: Tensor | np.ndarray | None = None,
) -> Tensor:
    """Adversarial CE on the student plus the tempered KL to the clean teacher.

    ``x_teacher`` replaces ``x_clean`` as the teacher's input in multi-view runs.
    """
    w, t = cfg.kd_weight, cfg.ard_temperature
    adv = model(x_adv)
    target = _frozen(teacher, x_clean if x_teacher is None else x_teacher)
    return cross_entropy(adv, labels) * (1.0 - w) + kl_div(target, adv, t) * (w * t * t)


def rslad_loss(
    model: Logits,
    teacher: Logits,
    x_clean: Tensor | np.ndarray,
    x_adv: Tensor | np.ndarray,
    cfg: RecipeConfig,
    x_teacher: Tensor | np.ndarray | None = None,
) -> Tensor:
    """Teacher soft labels on both branches; no hard labels."""
    w = cfg.rslad_weight
    target = _frozen(teacher, x_clean if x_teacher is None else x_teacher)
    clean_term = kl_div(target, model(x_clean))
    adv_term = kl_div(target, model(x_adv))
    return clean_term * (1.0 - w) + adv_term * w


def trades_from_logits(clean: Tensor, adv: Tensor, labels: np.ndarray, beta: float) -> Tensor:
    return cross_entropy(clean, labels) + kl_div(clean, adv) * beta


def trades_loss(
    model: Logits,
    x_clean: Tensor | np.ndarray,
    x_adv: Tensor | np.ndarray,
    labels: np.ndarray,
    beta: float = 6.0,
) -> Tensor:
    """CE(model(x_clean)) + beta*KL(model(x_clean) || model(x_adv))."""
    return trades_from_logits(model(x_clean), model(x_adv), labels, beta)
