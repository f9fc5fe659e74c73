"""Module base class and the layers the teacher and student are built from."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from ..errors import ShapeError
from ..tensor import Parameter, Tensor, ops


class Module:
    """Holds Parameters and sub-Modules as attributes, named by attribute path."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            full = f"{prefix}{name}"
            if isinstance(value, Parameter):
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full + ".")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise ShapeError(f"load_state_dict: missing {missing}, unexpected {unexpected}")
        for name, p in own.items():
            if state[name].shape != p.shape:
                raise ShapeError(
                    f"load_state_dict: {name} has shape {state[name].shape}, expected {p.shape}"
                )
            p.data = np.array(state[name], dtype=p.dtype)


class ModuleList(Module):
    def __init__(self, modules: list[Module]):
        self._items = list(modules)
        for i, m in enumerate(self._items):
            setattr(self, str(i), m)

    def __iter__(self) -> Iterator[Module]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, i: int) -> Module:
        return self._items[i]


def _he(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


class Conv1d(Module):
    def __init__(
        self,
        rng: np.random.Generator,
        c_in: int,
        c_out: int,
        kernel: int,
        stride: int = 1,
        padding: int = 0,
        bias: bool = True,
    ):
        self.weight = Parameter(_he(rng, (c_out, c_in, kernel), c_in * kernel))
        self.bias = Parameter(np.zeros(c_out)) if bias else None
        self.stride = stride
        self.padding = padding

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv1d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class Linear(Module):
    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int, gain: float = 2.0):
        self.weight = Parameter(rng.normal(0.0, np.sqrt(gain / d_in), size=(d_in, d_out)))
        self.bias = Parameter(np.zeros(d_out))

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias


class ScaleShift(Module):
    """Learned per-channel scale and shift in place of batch normalization."""

    def __init__(self, channels: int, init_scale: float = 1.0):
        self.scale = Parameter(np.full(channels, init_scale))
        self.shift = Parameter(np.zeros(channels))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.scale_shift(x, self.scale, self.shift)


class ResidualBlock(Module):
    """conv-affine-relu-conv-affine plus a shortcut, then relu.

    The shortcut is a strided 1x1 conv when the shape changes.
    """

    def __init__(self, rng: np.random.Generator, c_in: int, c_out: int, stride: int = 1):
        self.conv1 = Conv1d(rng, c_in, c_out, 3, stride=stride, padding=1, bias=False)
        self.norm1 = ScaleShift(c_out)
        self.conv2 = Conv1d(rng, c_out, c_out, 3, padding=1, bias=False)
        self.norm2 = ScaleShift(c_out, init_scale=0.5)
        self.shortcut = (
            Conv1d(rng, c_in, c_out, 1, stride=stride) if stride != 1 or c_in != c_out else None
        )

    def __call__(self, x: Tensor) -> Tensor:
        h = ops.relu(self.norm1(self.conv1(x)))
        h = self.norm2(self.conv2(h))
        skip = self.shortcut(x) if self.shortcut is not None else x
        return ops.relu(h + skip)


def as_batch(x: Tensor | np.ndarray, length: int) -> Tensor:
    """(N, L) waveforms to the (N, 1, L) layout conv layers expect."""
    if not isinstance(x, Tensor):
        x = Tensor(x)
    if x.ndim != 2 or x.shape[1] != length:
        raise ShapeError(f"model input: expected (batch, {length}), got {x.shape}")
    return ops.reshape(x, (x.shape[0], 1, length))
