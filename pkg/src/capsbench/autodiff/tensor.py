"""Dense tensors with a reverse-mode gradient tape.

Every differentiable primitive produces a new :class:`Tensor` that remembers
the tensors it was computed from and a closure that maps the output gradient
to input gradients. :func:`backward` orders those nodes into a
:class:`ComputationRecord` and walks it once in reverse.
"""
from __future__ import annotations

import contextlib
import logging
from typing import Callable, Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

_state = {"grad_enabled": True, "check_finite": False}

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class NumericError(ArithmeticError):
    """Raised when a non-finite value shows up where it must not."""


@contextlib.contextmanager
def no_grad():
    """Run forward computations without recording them."""
    prev = _state["grad_enabled"]
    _state["grad_enabled"] = False
    try:
        yield
    finally:
        _state["grad_enabled"] = prev


@contextlib.contextmanager
def check_finite(enabled: bool = True):
    """Debug mode: every produced tensor is checked for NaN/Inf."""
    prev = _state["check_finite"]
    _state["check_finite"] = enabled
    try:
        yield
    finally:
        _state["check_finite"] = prev


def grad_enabled() -> bool:
    return _state["grad_enabled"]


class Tensor:
    """An N-dimensional real array that can take part in differentiation."""

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self.op: str = "leaf"

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: Sequence["Tensor"],
                 backward: BackwardFn, op: str) -> "Tensor":
        out = cls.__new__(cls)
        Tensor.__init__(out, data)
        if _state["check_finite"] and not np.all(np.isfinite(out.data)):
            raise NumericError(f"non-finite values produced by {op}")
        if _state["grad_enabled"] and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
            out.op = op
        return out

    # -- array-like surface --
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
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.item())

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        grad = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{grad})"

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> ComputationRecord:
        return backward(self)

    # operator sugar lives in ops.py and is attached at import time


class Parameter(Tensor):
    """A trainable leaf tensor with a name and an accumulated gradient."""

    def __init__(self, data, name: str = "", dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.name = name
        self.grad = np.zeros_like(self.data)

    @property
    def value(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


class ComputationRecord:
    """Topologically ordered list of the ops that produced a tensor.

    Inputs always precede the ops that consume them; each op appears once.
    """

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def trace(cls, root: Tensor) -> "ComputationRecord":
        order: list[Tensor] = []
        seen: set[int] = set()
        # iterative DFS, recursion overflows on long routing unrolls
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
            for parent in reversed(node._parents):
                if id(parent) not in seen and parent.requires_grad:
                    stack.append((parent, False))
        return cls(order)

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    def ops(self) -> list[str]:
        return [n.op for n in self.nodes]


def backward(loss: Tensor, params: Iterable[Parameter] | None = None,
             record: ComputationRecord | None = None) -> ComputationRecord:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf.

    If ``params`` is given their gradients are reset to zero first, so
    parameters the loss does not reach end up with a zero gradient.
    """
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if params is not None:
        for p in params:
            p.zero_grad()
    if record is None:
        record = ComputationRecord.trace(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(record.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            # leaf
            if node.grad is None:
                node.grad = np.array(g, copy=True)
            else:
                node.grad = node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    return record
