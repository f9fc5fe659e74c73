from .apgd import apgd, apgd_targeted, dlr_targeted_per_sample
from .base import ce_per_sample, kl_per_sample, project
from .ensemble import attack_names, ensemble_eval, predict, run_attack
from .pgd import fgsm, pgd

__all__ = [
    "apgd",
    "apgd_targeted",
    "attack_names",
    "ce_per_sample",
    "dlr_targeted_per_sample",
    "ensemble_eval",
    "fgsm",
    "kl_per_sample",
    "pgd",
    "predict",
    "project",
    "run_attack",
]
