from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from ..errors import ConfigError
from ..tensor import Tensor, no_grad
from ..types import AttackFamily, AttackSpec, EnsembleResult
from .apgd import apgd, apgd_targeted
from .base import Model
from .pgd import fgsm, pgd

log = logging.getLogger("vickd.attacks")


def run_attack(
    model: Model,
    x: np.ndarray,
    y: np.ndarray,
    spec: AttackSpec,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Dispatch on ``spec.family`` with the CE (or targeted DLR) objective."""
    if spec.family == AttackFamily.fgsm:
        return fgsm(model, x, y, spec)
    if spec.family == AttackFamily.pgd:
        return pgd(model, x, y, spec, rng=rng)
    if spec.family == AttackFamily.apgd_ce:
        return apgd(model, x, y, spec, rng=rng)
    return apgd_targeted(model, x, y, spec, rng=rng)


def predict(model: Model, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    out = []
    with no_grad():
        for start in range(0, len(x), batch_size):
            chunk = x[start:start + batch_size]
            out.append(model(Tensor(chunk, dtype=chunk.dtype)).data.argmax(axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def attack_names(specs: Sequence[AttackSpec]) -> list[str]:
    """Unique column names: the family, suffixed when a family repeats."""
    names: list[str] = []
    for spec in specs:
        name = spec.label
        n = 2
        while name in names:
            name = f"{spec.label}_{n}"
            n += 1
        names.append(name)
    return names


def ensemble_eval(
    model: Model,
    dataset,
    specs: Sequence[AttackSpec],
    seed: int = 0,
    batch_size: int = 64,
) -> EnsembleResult:
    """A sample is robust iff it is classified correctly clean and under every attack.

    Attacks only run on clean-correct samples; the rest count as non-robust.
    ``dataset`` is a Dataset or an (x, y) pair.
    """
    x, y = dataset if isinstance(dataset, tuple) else (dataset.x, dataset.y)
    if len({s.epsilon for s in specs}) > 1:
        raise ConfigError(f"ensemble attacks must share epsilon, got {sorted({s.epsilon for s in specs})}")
    y = np.asarray(y)
    clean = predict(model, x) == y
    per_attack: dict[str, np.ndarray] = {}
    for i, (name, spec) in enumerate(zip(attack_names(specs), specs)):
        robust = clean.copy()
        idx = np.flatnonzero(clean)
        rng = np.random.default_rng([seed, i])
        for start in range(0, len(idx), batch_size):
            b = idx[start:start + batch_size]
            x_adv = run_attack(model, x[b], y[b], spec, rng)
            robust[b] = predict(model, x_adv) == y[b]
        per_attack[name] = robust
        log.info("%s eps=%.2g robust %.2f%%", name, spec.epsilon, 100.0 * robust.mean() if len(robust) else 0.0)
    overall = clean.copy()
    for flags in per_attack.values():
        overall &= flags
    return EnsembleResult(
        clean=clean.tolist(),
        per_attack={k: v.tolist() for k, v in per_attack.items()},
        overall=overall.tolist(),
    )
