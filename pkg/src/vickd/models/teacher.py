"""Teacher: residual conv stack with a learned weighted sum over layer outputs.

Each of the L blocks emits a (batch, d_t, frames) hidden sequence. The
representation Z is the softmax(w)-weighted sum of those sequences averaged
over frames. The linear head is only used for fine-tuning and for the
logit-matching baselines.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..tensor import Parameter, Tensor, ops
from ..types import ModelRole, ModelSpec
from .layers import Conv1d, Linear, Module, ModuleList, ScaleShift, as_batch

TEACHER_PRESETS = {"resconv": {"layers": 6, "stem_channels": 32}}


class TeacherLayer(Module):
    def __init__(self, rng: np.random.Generator, width: int):
        self.conv = Conv1d(rng, width, width, 3, padding=1, bias=False)
        self.norm = ScaleShift(width, init_scale=0.5)

    def __call__(self, h: Tensor) -> Tensor:
        return h + ops.relu(self.norm(self.conv(h)))


class TeacherEncoder(Module):
    def __init__(self, rng: np.random.Generator, d_t: int = 64, layers: int = 6, stem_channels: int = 32):
        self.stem1 = Conv1d(rng, 1, stem_channels, 20, stride=10)
        self.stem2 = Conv1d(rng, stem_channels, d_t, 4, stride=2)
        self.blocks = ModuleList([TeacherLayer(rng, d_t) for _ in range(layers)])
        self.layer_logits = Parameter(np.zeros(layers))

    def hidden_states(self, x: Tensor) -> list[Tensor]:
        h = ops.relu(self.stem2(ops.relu(self.stem1(x))))
        states = []
        for block in self.blocks:
            h = block(h)
            states.append(h)
        return states

    def layer_weights(self) -> Tensor:
        return ops.softmax(self.layer_logits, axis=0)

    def aggregate(self, states: list[Tensor]) -> Tensor:
        w = self.layer_weights()
        mixed = states[0] * w[0]
        for i, h in enumerate(states[1:], 1):
            mixed = mixed + h * w[i]
        return ops.mean(mixed, axis=2)

    def __call__(self, x: Tensor) -> Tensor:
        return self.aggregate(self.hidden_states(x))


class Teacher(Module):
    role = ModelRole.teacher

    def __init__(self, spec: ModelSpec):
        if spec.preset not in TEACHER_PRESETS:
            raise ConfigError(f"unknown teacher preset {spec.preset!r}; known: {sorted(TEACHER_PRESETS)}")
        self._spec = spec
        rng = np.random.default_rng(spec.seed)
        self.encoder = TeacherEncoder(rng, spec.d_t, **TEACHER_PRESETS[spec.preset])
        self.head = Linear(rng, spec.d_t, spec.classes, gain=1.0)

    @property
    def spec(self) -> ModelSpec:
        return self._spec

    @property
    def d_t(self) -> int:
        return self._spec.d_t

    def forward(self, x: Tensor | np.ndarray) -> tuple[Tensor, Tensor]:
        """Return (Z, logits) for a (batch, length) waveform batch."""
        z = self.encoder(as_batch(x, self._spec.length))
        return z, self.head(z)

    def embed(self, x: Tensor | np.ndarray) -> Tensor:
        return self.encoder(as_batch(x, self._spec.length))

    def logits(self, x: Tensor | np.ndarray) -> Tensor:
        return self.forward(x)[1]

    __call__ = forward
