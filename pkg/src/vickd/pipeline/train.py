"""Training stages: baselines, teacher fine-tuning and distillation."""

from __future__ import annotations

import logging
import time
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from ..attacks import ce_per_sample, kl_per_sample, pgd
from ..augment import ViewBatch, sample_view_batch
from ..errors import ConfigError
from ..losses import (
    ard_loss,
    cross_entropy,
    kd_loss,
    rslad_loss,
    trades_loss,
    vic_kd_terms,
)
from ..models import Module, Student, Teacher, checkpoint_meta, save_checkpoint
from ..tensor import Adam, LrSchedule, Tensor, backward
from ..types import (
    EpochRecord,
    ExperimentConfig,
    ModelRole,
    ModelSpec,
    OptimConfig,
    Recipe,
    TrainMode,
)
from .common import load_frozen, logits_of, prepare_data, run_dir, write_history

log = logging.getLogger("vickd.pipeline")

CHECKPOINT_NAME = "model.ckpt"
TRAIN_LOG_NAME = "train_log.json"
MIN_BATCH = 2

# (x, y, dataset indices, epoch) -> (loss, logits for train accuracy, scalar terms)
StepFn = Callable[[np.ndarray, np.ndarray, np.ndarray, int], tuple[Tensor, np.ndarray, dict[str, float]]]


@dataclass
class TrainResult:
    model: Module
    checkpoint: Path
    history: list[EpochRecord]
    seconds: float


def _steps_per_epoch(n: int, batch: int) -> int:
    """Batches of at least two samples; a trailing single sample is skipped."""
    full, rest = divmod(n, batch)
    return max(full + (rest >= MIN_BATCH), 1)


def _fit(
    model: Module,
    x: np.ndarray,
    y: np.ndarray,
    optim: OptimConfig,
    step_fn: StepFn,
    seed: int,
    label: str,
) -> tuple[list[EpochRecord], float]:
    """Mini-batch Adam with a linearly decaying learning rate."""
    opt = Adam(model.parameters())
    n = len(x)
    batch = min(optim.batch_size, n)
    steps_per_epoch = _steps_per_epoch(n, batch)
    schedule = LrSchedule(optim.lr_start, optim.lr_end, optim.epochs * steps_per_epoch)
    order_rng = np.random.default_rng([seed, 0x5EED])
    history: list[EpochRecord] = []
    step = 0
    started = time.perf_counter()

    for epoch in range(optim.epochs):
        order = order_rng.permutation(n)
        losses: list[float] = []
        terms: dict[str, list[float]] = defaultdict(list)
        correct = seen = 0
        lr = schedule(step)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            if len(idx) < MIN_BATCH:
                continue
            lr = schedule(step)
            loss, logits, extra = step_fn(x[idx], y[idx], idx, epoch)
            opt.zero_grad()
            backward(loss)
            opt.step(lr)
            step += 1
            losses.append(loss.item())
            correct += int((logits.argmax(axis=1) == y[idx]).sum())
            seen += len(idx)
            for k, v in extra.items():
                terms[k].append(v)
        record = EpochRecord(
            epoch=epoch + 1,
            loss=float(np.mean(losses)) if losses else 0.0,
            train_acc=100.0 * correct / seen if seen else 0.0,
            lr=lr,
            terms={k: float(np.mean(v)) for k, v in terms.items()},
        )
        history.append(record)
        log.info(
            "%s epoch %d/%d loss %.4f acc %.2f%% lr %.2e%s",
            label, record.epoch, optim.epochs, record.loss, record.train_acc, record.lr,
            "".join(f" {k} {v:.4f}" for k, v in record.terms.items()),
        )
    return history, time.perf_counter() - started


def _natural_step(model) -> StepFn:
    def step(xb, yb, idx, epoch):
        logits = model.logits(xb)
        return cross_entropy(logits, yb), logits.data, {}

    return step


def _trades_step(model, config: ExperimentConfig, seed: int) -> StepFn:
    spec = config.recipe.attack
    beta = config.recipe.beta_trades
    rng = np.random.default_rng([seed, 0xA77])

    def step(xb, yb, idx, epoch):
        clean = logits_of(model, xb)
        x_adv = pgd(model.logits, xb, clean, spec, loss_fn=kl_per_sample, rng=rng)
        return trades_loss(model.logits, xb, x_adv, yb, beta), clean, {}

    return step


def _finish(
    model: Module,
    config: ExperimentConfig,
    stage: str,
    history: list[EpochRecord],
    seconds: float,
    meta: dict,
    out_dir: Path | None,
) -> TrainResult:
    out = Path(out_dir) if out_dir else run_dir(config, stage)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        **meta,
        "epochs": len(history),
        "seed": config.seed,
        "train_seconds": round(seconds, 3),
        "classes": model.spec.classes,
    }
    ckpt = save_checkpoint(model, out / CHECKPOINT_NAME, meta)
    write_history(out / TRAIN_LOG_NAME, history)
    log.info("%s done in %.1fs -> %s", stage, seconds, ckpt)
    return TrainResult(model=model, checkpoint=ckpt, history=history, seconds=seconds)


def train_baseline(
    config: ExperimentConfig,
    mode: TrainMode = TrainMode.natural,
    out_dir: Path | None = None,
) -> TrainResult:
    """Train the student preset alone with plain CE or with TRADES."""
    train, _, _ = prepare_data(config)
    student = Student(ModelSpec(
        role=ModelRole.student,
        preset=config.student,
        classes=train.num_classes,
        length=train.length,
        seed=config.seed,
    ))
    mode = TrainMode(mode)
    stage = f"baseline-{mode.value}-{config.student}"
    step_fn = _natural_step(student) if mode == TrainMode.natural else _trades_step(student, config, config.seed)
    history, seconds = _fit(student, train.x, train.y, config.baseline, step_fn, config.seed, stage)
    recipe = "natural" if mode == TrainMode.natural else "trades-baseline"
    return _finish(student, config, stage, history, seconds,
                   {"recipe": recipe, "teacher": "-", "multi_view": False}, out_dir)


def finetune_teacher(config: ExperimentConfig, out_dir: Path | None = None) -> TrainResult:
    """Fit the teacher and its classification head, robustly if ``teacher.robust``."""
    train, _, _ = prepare_data(config)
    teacher = Teacher(ModelSpec(
        role=ModelRole.teacher,
        preset=config.teacher.preset,
        classes=train.num_classes,
        length=train.length,
        seed=config.seed,
    ))
    kind = "robust" if config.teacher.robust else "standard"
    stage = f"teacher-{kind}"
    step_fn = _trades_step(teacher, config, config.seed) if config.teacher.robust else _natural_step(teacher)
    history, seconds = _fit(teacher, train.x, train.y, config.teacher.optim, step_fn, config.seed, stage)
    return _finish(teacher, config, stage, history, seconds,
                   {"recipe": f"teacher-{kind}", "teacher": config.teacher.preset,
                    "teacher_kind": kind, "multi_view": False}, out_dir)


def _distill_step(student: Student, teacher: Teacher, config: ExperimentConfig, sample_rate: int) -> StepFn:
    cfg = config.recipe
    spec = cfg.attack
    rng = np.random.default_rng([config.seed, 0xA77])

    def views(xb, idx, epoch) -> ViewBatch:
        if cfg.multi_view:
            return sample_view_batch(xb, idx, config.seed, epoch, cfg.views, sample_rate)
        return ViewBatch.identical(xb)

    def step(xb, yb, idx, epoch):
        vb = views(xb, idx, epoch)
        x_s = vb.view_t_prime
        x_t = vb.view_t if cfg.multi_view else None
        if cfg.recipe == Recipe.kd:
            logits = student.logits(x_s)
            return kd_loss(logits, logits_of(teacher, vb.view_t), yb, cfg), logits.data, {}
        if cfg.recipe == Recipe.ard:
            x_adv = pgd(student.logits, x_s, yb, spec, loss_fn=ce_per_sample, rng=rng)
            loss = ard_loss(student.logits, teacher.logits, x_s, x_adv, yb, cfg, x_teacher=x_t)
            return loss, logits_of(student, x_s), {}
        if cfg.recipe == Recipe.rslad:
            soft = logits_of(teacher, vb.view_t)
            x_adv = pgd(student.logits, x_s, soft, spec, loss_fn=kl_per_sample, rng=rng)
            loss = rslad_loss(student.logits, teacher.logits, x_s, x_adv, cfg, x_teacher=x_t)
            return loss, logits_of(student, x_s), {}
        clean = logits_of(student, x_s)
        x_adv = pgd(student.logits, x_s, clean, spec, loss_fn=kl_per_sample, rng=rng)
        if cfg.recipe == Recipe.trades:
            return trades_loss(student.logits, x_s, x_adv, yb, cfg.beta_trades), clean, {}
        terms = vic_kd_terms(student, teacher, vb, x_adv, yb, cfg)
        return terms.combine(cfg.alpha), clean, terms.as_floats()

    return step


def distill(config: ExperimentConfig, teacher_ckpt: Path, out_dir: Path | None = None) -> TrainResult:
    """Train a student from a frozen teacher under ``config.recipe``."""
    train, _, _ = prepare_data(config)
    teacher = load_frozen(teacher_ckpt)
    if not isinstance(teacher, Teacher):
        raise ConfigError(f"{teacher_ckpt} holds a {teacher.spec.role.value}, not a teacher")
    if teacher.spec.classes != train.num_classes:
        raise ConfigError(
            f"teacher predicts {teacher.spec.classes} classes, dataset has {train.num_classes}"
        )
    if teacher.spec.length != train.length:
        raise ConfigError(f"teacher expects {teacher.spec.length} samples, dataset has {train.length}")

    student = Student(ModelSpec(
        role=ModelRole.student,
        preset=config.student,
        classes=train.num_classes,
        length=train.length,
        seed=config.seed,
    ))
    if student.spec.d_t != teacher.d_t:
        student.rebuild_projection(teacher.d_t, config.seed)

    cfg = config.recipe
    stage = f"distill-{cfg.recipe.value}{'-mv' if cfg.multi_view else ''}-{config.student}"
    step_fn = _distill_step(student, teacher, config, train.sample_rate)
    history, seconds = _fit(student, train.x, train.y, config.distill, step_fn, config.seed, stage)
    meta = {
        "recipe": cfg.recipe.value,
        "teacher": f"{teacher.spec.preset}/{checkpoint_meta(teacher_ckpt).get('teacher_kind', 'standard')}",
        "multi_view": cfg.multi_view,
    }
    return _finish(student, config, stage, history, seconds, meta, out_dir)
