"""Shared fixtures for the vickd test suite."""

import os

import numpy as np
import pytest

# Deterministic, desk-profile runs regardless of the developer's .env
os.environ["VICKD_SEED"] = ""
os.environ["VICKD_PROFILE"] = "desk"
os.environ["VICKD_LOG_LEVEL"] = "WARNING"

TINY_RATE = 2000
TINY_LENGTH = 400


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def float64():
    """Run the test body with the engine in 64-bit mode."""
    from vickd.tensor import float64_mode

    with float64_mode():
        yield


@pytest.fixture
def tiny_dataset():
    """4 synthetic keyword classes, 20 utterances each, 400 samples at 2 kHz."""
    from vickd.data import synth_dataset

    return synth_dataset(4, 20, seed=0, sample_rate=TINY_RATE, length=TINY_LENGTH)


@pytest.fixture
def make_spec():
    """Factory for ModelSpec objects sized for the tiny dataset."""
    from vickd.types import ModelRole, ModelSpec

    def _make(role=ModelRole.student, preset=None, classes=4, length=TINY_LENGTH, d_t=16, seed=0):
        if preset is None:
            preset = "resconv" if role == ModelRole.teacher else "tcresnet-mini"
        return ModelSpec(role=role, preset=preset, classes=classes, length=length, d_t=d_t, seed=seed)

    return _make


@pytest.fixture
def tiny_teacher(make_spec):
    from vickd.models import Teacher
    from vickd.types import ModelRole

    return Teacher(make_spec(role=ModelRole.teacher))


@pytest.fixture
def tiny_student(make_spec):
    from vickd.models import Student

    return Student(make_spec())


@pytest.fixture
def make_config(tmp_path):
    """Factory for ExperimentConfig objects that train in seconds."""
    from vickd.types import AttackFamily, AttackSpec, ExperimentConfig

    def _make(**overrides):
        eps = 1.5e-3
        data = {
            "name": "tiny",
            "dataset": {"classes": 4, "per_class": 20, "sample_rate": TINY_RATE, "length": TINY_LENGTH},
            "teacher": {"optim": {"epochs": 1, "batch_size": 16, "lr_start": 5e-4, "lr_end": 5e-5}},
            "baseline": {"epochs": 2, "batch_size": 16},
            "distill": {"epochs": 1, "batch_size": 16},
            "recipe": {"attack": {"family": "pgd", "epsilon": eps, "step_size": 3e-4, "steps": 2}},
            "eval_attacks": [
                AttackSpec(family=AttackFamily.apgd_ce, epsilon=eps, step_size=2 * eps, steps=3).model_dump(),
                AttackSpec(family=AttackFamily.pgd, epsilon=eps, step_size=eps / 4, steps=3).model_dump(),
            ],
            "eval_samples": 8,
            "eval_batch_size": 8,
            "output_dir": str(tmp_path / "runs"),
        }
        for key, value in overrides.items():
            node = data
            *parents, leaf = key.split("__")
            for p in parents:
                node = node.setdefault(p, {})
            node[leaf] = value
        return ExperimentConfig.model_validate(data)

    return _make


@pytest.fixture
def make_row():
    """Factory for ReportRow objects."""
    from vickd.types import ReportRow

    def _make(recipe="vic_kd", student="tcresnet-mini", classes=12, seed=0, clean=90.0,
              robust=None, ensemble=40.0, multi_view=False, teacher="resconv/standard"):
        robust = robust if robust is not None else {"apgd_ce": 45.0, "pgd": 50.0}
        return ReportRow(
            recipe=recipe, teacher=teacher, student=student, multi_view=multi_view, classes=classes,
            clean_acc=clean, robust_acc=robust, ensemble_acc=ensemble, params=42_000, epochs=60,
            seed=seed, train_seconds=12.5,
        )

    return _make
