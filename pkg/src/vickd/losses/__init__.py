from .classification import accuracy, cross_entropy, kl_div
from .distill import ard_loss, kd_loss, rslad_loss, trades_from_logits, trades_loss
from .vicreg import (
    VicKdTerms,
    vic_kd_loss,
    vic_kd_terms,
    vicreg_covariance,
    vicreg_invariance,
    vicreg_loss,
    vicreg_variance,
)

__all__ = [
    "VicKdTerms",
    "accuracy",
    "ard_loss",
    "cross_entropy",
    "kd_loss",
    "kl_div",
    "rslad_loss",
    "trades_from_logits",
    "trades_loss",
    "vic_kd_loss",
    "vic_kd_terms",
    "vicreg_covariance",
    "vicreg_invariance",
    "vicreg_loss",
    "vicreg_variance",
]
