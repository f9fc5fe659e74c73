"""Compact TC-ResNet-style students with classification and projection heads."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, ShapeError
from ..tensor import Tensor, ops
from ..types import ModelRole, ModelSpec
from .layers import Conv1d, Linear, Module, ModuleList, ResidualBlock, as_batch

# block widths; the last one is d_s
STUDENT_PRESETS = {
    "tcresnet-mini": (24, 32, 48),
    "xvector-mini": (32, 48, 48),
}
STEM_CHANNELS = 16
PARAM_BUDGET = 96_000


class StudentEncoder(Module):
    def __init__(self, rng: np.random.Generator, widths: tuple[int, ...]):
        self.stem = Conv1d(rng, 1, STEM_CHANNELS, 20, stride=10)
        chans = (STEM_CHANNELS, *widths)
        self.blocks = ModuleList(
            [ResidualBlock(rng, chans[i], chans[i + 1], stride=2) for i in range(len(widths))]
        )

    def __call__(self, x: Tensor) -> Tensor:
        h = ops.relu(self.stem(x))
        for block in self.blocks:
            h = block(h)
        return ops.mean(h, axis=2)


class ProjectionHead(Module):
    """d_s -> 2*d_t -> d_t perceptron producing Z'."""

    def __init__(self, rng: np.random.Generator, d_s: int, d_t: int):
        self.fc1 = Linear(rng, d_s, 2 * d_t)
        self.fc2 = Linear(rng, 2 * d_t, d_t, gain=1.0)

    @property
    def out_dim(self) -> int:
        return self.fc2.bias.shape[0]

    def __call__(self, h: Tensor) -> Tensor:
        return self.fc2(ops.relu(self.fc1(h)))


class Student(Module):
    role = ModelRole.student

    def __init__(self, spec: ModelSpec):
        if spec.preset not in STUDENT_PRESETS:
            raise ConfigError(f"unknown student preset {spec.preset!r}; known: {sorted(STUDENT_PRESETS)}")
        self._spec = spec
        widths = STUDENT_PRESETS[spec.preset]
        rng = np.random.default_rng(spec.seed)
        self.encoder = StudentEncoder(rng, widths)
        self.head = Linear(rng, widths[-1], spec.classes, gain=1.0)
        self.projection = ProjectionHead(rng, widths[-1], spec.d_t)
        self._check_projection()

    @property
    def spec(self) -> ModelSpec:
        return self._spec

    @property
    def d_s(self) -> int:
        return STUDENT_PRESETS[self._spec.preset][-1]

    def _check_projection(self) -> None:
        if self.projection.out_dim != self._spec.d_t:
            raise ShapeError(
                f"projection head emits {self.projection.out_dim} dims, teacher Z has {self._spec.d_t}"
            )

    def rebuild_projection(self, d_t: int, seed: int) -> None:
        """Swap in a fresh projection head for a teacher with a different d_t."""
        self._spec = self._spec.model_copy(update={"d_t": d_t})
        self.projection = ProjectionHead(np.random.default_rng(seed), self.d_s, d_t)
        self._check_projection()

    def encoder_parameters(self) -> int:
        """Parameters used at test time (encoder + classification head)."""
        return self.encoder.num_parameters() + self.head.num_parameters()

    def forward(
        self, x: Tensor | np.ndarray, with_projection: bool = False
    ) -> tuple[Tensor, Tensor, Tensor | None]:
        """Return (H', Y', Z'); Z' is None unless ``with_projection``."""
        h = self.encoder(as_batch(x, self._spec.length))
        y = self.head(h)
        z = self.projection(h) if with_projection else None
        return h, y, z

    def logits(self, x: Tensor | np.ndarray) -> Tensor:
        return self.forward(x)[1]

    __call__ = forward


def build_model(spec: ModelSpec) -> Module:
    from .teacher import Teacher

    if spec.role == ModelRole.teacher:
        return Teacher(spec)
    return Student(spec)
