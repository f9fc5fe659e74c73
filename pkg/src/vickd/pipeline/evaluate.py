from __future__ import annotations

import logging
from pathlib import Path

from ..attacks import ensemble_eval
from ..errors import ConfigError
from ..models import Student, checkpoint_meta, load_checkpoint
from ..types import ExperimentConfig, ReportRow
from .common import prepare_data

log = logging.getLogger("vickd.pipeline")


def evaluate(config: ExperimentConfig, ckpt: Path) -> ReportRow:
    """Clean and robust accuracy of a checkpoint on the test split.

    Robust accuracy per attack and for the ensemble (a sample counts only if
    it survives every attack in ``config.eval_attacks``).
    """
    model = load_checkpoint(ckpt)
    meta = checkpoint_meta(ckpt)
    _, _, test = prepare_data(config)
    test = test.head(config.eval_samples)
    if model.spec.classes != test.num_classes:
        raise ConfigError(f"{ckpt} predicts {model.spec.classes} classes, test split has {test.num_classes}")
    if model.spec.length != test.length:
        raise ConfigError(f"{ckpt} expects {model.spec.length} samples, test split has {test.length}")

    result = ensemble_eval(
        model.logits, test, config.eval_attacks, seed=config.seed, batch_size=config.eval_batch_size
    )
    params = model.encoder_parameters() if isinstance(model, Student) else model.num_parameters()
    row = ReportRow(
        recipe=meta.get("recipe", "unknown"),
        teacher=meta.get("teacher", "-"),
        student=model.spec.preset,
        multi_view=bool(meta.get("multi_view", False)),
        classes=model.spec.classes,
        clean_acc=result.clean_accuracy,
        robust_acc=result.attack_accuracy(),
        ensemble_acc=result.robust_accuracy,
        params=params,
        epochs=int(meta.get("epochs", 0)),
        seed=int(meta.get("seed", config.seed)),
        train_seconds=float(meta.get("train_seconds", 0.0)),
    )
    log.info(
        "%s %s%s: clean %.2f%% robust %.2f%% on %d samples",
        row.recipe, row.student, " (mv)" if row.multi_view else "", row.clean_acc, row.ensemble_acc, len(test),
    )
    return row
