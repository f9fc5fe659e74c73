"""numpy autodiff engine: tensors, ops, Adam."""

from . import ops
from .core import (
    Function,
    Graph,
    Parameter,
    Tensor,
    as_tensor,
    backward,
    default_dtype,
    float64_mode,
    grad,
    is_grad_enabled,
    no_grad,
)
from .gradcheck import gradcheck
from .optim import Adam, AdamState, LrSchedule, adam_step

__all__ = [
    "Adam",
    "AdamState",
    "Function",
    "Graph",
    "LrSchedule",
    "Parameter",
    "Tensor",
    "adam_step",
    "as_tensor",
    "backward",
    "default_dtype",
    "float64_mode",
    "grad",
    "gradcheck",
    "is_grad_enabled",
    "no_grad",
    "ops",
]
