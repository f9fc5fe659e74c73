"""VICReg terms on the student embedding and the VIC-KD objective.

Variance and covariance only see Z' (student projection); the teacher's Z
enters through the invariance term. The combined loss is a convex mix of
TRADES on the student view and the weighted VICReg sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from ..errors import ConfigError, ShapeError
from ..tensor import Tensor, as_tensor, no_grad, ops
from ..types import RecipeConfig, VicregWeights
from .distill import trades_from_logits


def _check_batch(name: str, z: Tensor) -> None:
    if z.ndim != 2 or z.shape[0] < 2:
        raise ShapeError(f"{name}: need a (n >= 2, d) batch, got {z.shape}")


def vicreg_variance(zp: Tensor, gamma: float = 1.0, eps: float = 1e-4) -> Tensor:
    _check_batch("vicreg_variance", zp)
    std = ops.sqrt(ops.var(zp, axis=0, ddof=1) + eps)
    return ops.mean(ops.relu(gamma - std))


def vicreg_invariance(z: Tensor | np.ndarray, zp: Tensor) -> Tensor:
    z = as_tensor(z)
    if z.shape != zp.shape or z.ndim != 2:
        raise ShapeError(f"vicreg_invariance: shapes {z.shape} and {zp.shape}")
    return ops.sum(ops.square(z - zp)) / z.shape[0]


def vicreg_covariance(zp: Tensor) -> Tensor:
    _check_batch("vicreg_covariance", zp)
    n, d = zp.shape
    centered = zp - ops.mean(zp, axis=0, keepdims=True)
    cov = (centered.T @ centered) / (n - 1)
    off_diagonal = cov * (1.0 - np.eye(d))
    return ops.sum(ops.square(off_diagonal)) / d


def vicreg_loss(z: Tensor | np.ndarray, zp: Tensor, weights: VicregWeights | None = None) -> Tensor:
    w = weights or VicregWeights()
    return (
        vicreg_variance(zp, w.gamma, w.eps) * w.lambda_var
        + vicreg_invariance(z, zp) * w.lambda_inv
        + vicreg_covariance(zp) * w.lambda_cov
    )


class _Views(Protocol):
    view_t: np.ndarray
    view_t_prime: np.ndarray


@dataclass
class VicKdTerms:
    trades: Tensor
    var: Tensor
    inv: Tensor
    cov: Tensor
    weights: VicregWeights

    def vicreg(self) -> Tensor:
        w = self.weights
        return self.var * w.lambda_var + self.inv * w.lambda_inv + self.cov * w.lambda_cov

    def combine(self, alpha: float) -> Tensor:
        if not 0.0 <= alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {alpha}")
        return self.trades * alpha + self.vicreg() * (1.0 - alpha)

    def as_floats(self) -> dict[str, float]:
        return {k: getattr(self, k).item() for k in ("trades", "var", "inv", "cov")}


def vic_kd_terms(student, teacher, views: _Views, x_adv: Tensor | np.ndarray, labels: np.ndarray, cfg: RecipeConfig) -> VicKdTerms:
    """Evaluate every VIC-KD term once.

    Z comes from the frozen teacher on ``view_t``; Z' from the student's
    projection of ``x_adv`` (the perturbed ``view_t_prime``).
    """
    with no_grad():
        z = teacher.embed(views.view_t).detach()
    clean_logits = student.logits(views.view_t_prime)
    _, adv_logits, zp = student.forward(x_adv, with_projection=True)
    w = cfg.vicreg
    return VicKdTerms(
        trades=trades_from_logits(clean_logits, adv_logits, labels, cfg.beta_trades),
        var=vicreg_variance(zp, w.gamma, w.eps),
        inv=vicreg_invariance(z, zp),
        cov=vicreg_covariance(zp),
        weights=w,
    )


def vic_kd_loss(student, teacher, views: _Views, x_adv: Tensor | np.ndarray, labels: np.ndarray, cfg: RecipeConfig) -> Tensor:
    """alpha*TRADES + (1-alpha)*(Var(Z') + Inv(Z, Z') + Cov(Z'))."""
    if not 0.0 <= cfg.alpha <= 1.0:
        raise ConfigError(f"alpha must be in [0, 1], got {cfg.alpha}")
    return vic_kd_terms(student, teacher, views, x_adv, labels, cfg).combine(cfg.alpha)
