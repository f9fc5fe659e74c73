"""Tensor, graph recording and reverse-mode differentiation.

A Tensor wraps a numpy array. Ops are Function subclasses: applying one runs
the numpy forward and, when any input requires grad, records the Function as
the output's creator. backward() orders the recorded nodes topologically and
walks them in reverse, accumulating into leaf ``.grad`` arrays.
"""

from __future__ import annotations

import contextlib
import threading
from typing import Any, Iterator, Sequence

import numpy as np

from ..errors import NumericError, ShapeError

_state = threading.local()


def default_dtype() -> type:
    return getattr(_state, "dtype", np.float32)


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextlib.contextmanager
def float64_mode() -> Iterator[None]:
    """Create new tensors as float64 inside the block (gradient checks)."""
    prev = default_dtype()
    _state.dtype = np.float64
    try:
        yield
    finally:
        _state.dtype = prev


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Run ops without recording graph nodes."""
    prev = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


class Function:
    """Base class for differentiable ops.

    ``forward`` receives the raw arrays of the inputs, ``backward`` receives
    dLoss/dOut and returns one gradient (or None) per input, already reduced
    to that input's shape.
    """

    op = "function"

    def __init__(self, *parents: Tensor):
        self.parents = parents
        self.saved: tuple[Any, ...] = ()

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> Sequence[np.ndarray | None]:
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs: Tensor, **kwargs: Any) -> Tensor:
        fn = cls(*inputs)
        out = np.asarray(fn.forward(*(t.data for t in inputs), **kwargs))
        if not np.isfinite(out).all():
            raise NumericError(f"{cls.op}: non-finite values in output")
        needs_grad = is_grad_enabled() and any(t.requires_grad for t in inputs)
        if not needs_grad:
            fn.saved = ()
        return Tensor(
            out,
            requires_grad=needs_grad,
            dtype=out.dtype,
            _ctx=fn if needs_grad else None,
        )


class Tensor:
    """n-dimensional float array that can take part in a differentiation graph."""

    __array_priority__ = 100
    __array_ufunc__ = None

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        *,
        dtype: Any = None,
        _ctx: Function | None = None,
    ):
        self.data = np.asarray(data, dtype=dtype or default_dtype())
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._ctx = _ctx

    # ---- introspection ----

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._ctx is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item: tensor of shape {self.shape} is not a scalar")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> Tensor:
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def __len__(self) -> int:
        return self.shape[0]

    # ---- operators (ops import lazily to avoid a cycle) ----

    def __add__(self, other: Any) -> Tensor:
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other: Any) -> Tensor:
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other: Any) -> Tensor:
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other: Any) -> Tensor:
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> Tensor:
        from . import ops
        return ops.div(self, other)

    def __rtruediv__(self, other: Any) -> Tensor:
        from . import ops
        return ops.div(other, self)

    def __neg__(self) -> Tensor:
        from . import ops
        return ops.mul(self, -1.0)

    def __matmul__(self, other: Tensor) -> Tensor:
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, idx: Any) -> Tensor:
        from . import ops
        return ops.getitem(self, idx)

    # ---- method forms of common ops ----

    def sum(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        from . import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        from . import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def var(self, axis: int = 0, ddof: int = 1, keepdims: bool = False) -> Tensor:
        from . import ops
        return ops.var(self, axis=axis, ddof=ddof, keepdims=keepdims)

    def square(self) -> Tensor:
        from . import ops
        return ops.square(self)

    def sqrt(self) -> Tensor:
        from . import ops
        return ops.sqrt(self)

    def relu(self) -> Tensor:
        from . import ops
        return ops.relu(self)

    def reshape(self, *shape: int) -> Tensor:
        from . import ops
        return ops.reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)

    @property
    def T(self) -> Tensor:
        from . import ops
        return ops.transpose(self)


class Parameter(Tensor):
    """A leaf tensor that is trained."""

    def __init__(self, data: Any, *, dtype: Any = None):
        super().__init__(data, requires_grad=True, dtype=dtype)


def as_tensor(value: Any) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


class Graph:
    """The recorded nodes reachable from a root, in topological order.

    Inputs come before the ops that consume them; the root is last.
    """

    def __init__(self, root: Tensor):
        self.root = root
        self.nodes = self._toposort(root)

    @staticmethod
    def _toposort(root: Tensor) -> list[Tensor]:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            if node._ctx is not None:
                for parent in node._ctx.parents:
                    if parent.requires_grad and id(parent) not in seen:
                        stack.append((parent, False))
        return order

    def leaves(self) -> list[Tensor]:
        return [n for n in self.nodes if n._ctx is None]

    def __len__(self) -> int:
        return len(self.nodes)

    def propagate(self, seed: np.ndarray) -> dict[int, np.ndarray]:
        """Push ``seed`` (dRoot/dRoot) back through every node exactly once.

        Returns gradients keyed by ``id()`` for the leaves only; gradients of
        intermediate nodes are released as soon as they have been consumed.
        """
        grads: dict[int, np.ndarray] = {id(self.root): seed}
        for node in reversed(self.nodes):
            ctx = node._ctx
            if ctx is None:
                continue
            g = grads.pop(id(node), None)
            if g is None:
                continue
            for parent, pg in zip(ctx.parents, ctx.backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg
        return grads


def _check_scalar(loss: Tensor, op: str) -> None:
    if loss.size != 1:
        raise ShapeError(f"{op}: loss must be a scalar, got shape {loss.shape}")


def backward(loss: Tensor) -> None:
    """Accumulate dLoss/dLeaf into ``.grad`` of every leaf requiring grad."""
    _check_scalar(loss, "backward")
    if not loss.requires_grad:
        return
    graph = Graph(loss)
    grads = graph.propagate(np.ones_like(loss.data))
    for leaf in graph.leaves():
        g = grads.get(id(leaf))
        if g is None:
            continue
        g = np.asarray(g, dtype=leaf.dtype).reshape(leaf.shape)
        leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g


def grad(loss: Tensor, wrt: Sequence[Tensor]) -> list[np.ndarray]:
    """dLoss/dx for each x in ``wrt`` without touching any ``.grad``."""
    _check_scalar(loss, "grad")
    if not loss.requires_grad:
        return [np.zeros_like(t.data) for t in wrt]
    grads = Graph(loss).propagate(np.ones_like(loss.data))
    out = []
    for t in wrt:
        g = grads.get(id(t))
        out.append(np.zeros_like(t.data) if g is None else np.asarray(g, dtype=t.dtype).reshape(t.shape))
    return out
