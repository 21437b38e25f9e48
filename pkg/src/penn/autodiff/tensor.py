"""Dense float64 tensors with a recording tape for reverse-mode gradients.

Tensors are rank 1 (a single feature vector) or rank 2 (a batch of row
vectors). Every op works along the last axis, so the same model code runs on
one sample or on a mini-batch.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

__all__ = [
    "ContractError",
    "DimensionError",
    "Node",
    "ParameterError",
    "Tape",
    "Tensor",
    "abs_",
    "add",
    "backward",
    "concat",
    "mean",
    "mul",
    "pair_softmax",
    "relu",
    "rowdot",
    "slice_cols",
    "softmax_with_temperature",
    "square",
    "sub",
]


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ParameterError(ValueError):
    """A scalar hyperparameter is outside its admissible range."""


class ContractError(RuntimeError):
    """An API precondition was violated."""


class Tensor:
    """A float64 array of rank 1 or 2 that may participate in differentiation."""

    __slots__ = ("data", "requires_grad", "grad", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if arr.ndim > 2:
            raise DimensionError(f"tensors are rank 1 or 2, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name

    @classmethod
    def _wrap(cls, arr: np.ndarray, requires_grad: bool) -> "Tensor":
        t = cls.__new__(cls)
        t.data = arr
        t.requires_grad = requires_grad
        t.grad = None
        t.name = None
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, shape is {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ContractError("division is only defined by constants")
        return mul(self, 1.0 / np.asarray(other, dtype=np.float64))


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# --------------------------------------------------------------------------
# tape
# --------------------------------------------------------------------------

_state = threading.local()


def _active_tape() -> "Tape | None":
    stack = getattr(_state, "stack", None)
    return stack[-1] if stack else None


@dataclass(eq=False)
class Op:
    name: str
    forward: Callable[..., np.ndarray]
    # (grad_out, input arrays, output array, **attrs) -> one grad (or None) per input
    backward: Callable[..., Sequence[np.ndarray | None]]


@dataclass(eq=False)
class Node:
    op: Op
    inputs: tuple[Tensor, ...]
    output: Tensor
    attrs: dict[str, Any] = field(default_factory=dict)


class Tape:
    """Records differentiable ops while active (use as a context manager)."""

    def __init__(self):
        self.nodes: list[Node] = []

    def __enter__(self) -> "Tape":
        stack = getattr(_state, "stack", None)
        if stack is None:
            stack = _state.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _state.stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, node: Node) -> None:
        self.nodes.append(node)

    def replay(self) -> list[np.ndarray]:
        """Re-run every recorded op from the current leaf values.

        Returns fresh output arrays in recording order; recorded outputs are
        left untouched so the two can be compared.
        """
        fresh: dict[int, np.ndarray] = {}
        outputs = []
        for node in self.nodes:
            args = [fresh.get(id(t), t.data) for t in node.inputs]
            out = node.op.forward(*args, **node.attrs)
            fresh[id(node.output)] = out
            outputs.append(out)
        return outputs


def _apply(op: Op, inputs: tuple[Tensor, ...], **attrs) -> Tensor:
    out = op.forward(*(t.data for t in inputs), **attrs)
    needs_grad = any(t.requires_grad for t in inputs)
    result = Tensor._wrap(out, needs_grad)
    if needs_grad:
        tape = _active_tape()
        if tape is not None:
            tape.record(Node(op, inputs, result, attrs))
    return result


def backward(tape: Tape, output: Tensor, params: Sequence[Tensor] | None = None):
    """Accumulate d(output)/d(leaf) by walking the tape in reverse.

    ``output`` must hold a single element. Gradients are stored on every leaf
    tensor that requires them (``.grad``); if ``params`` is given the list of
    their gradients is returned in the same order (zeros when unreachable).
    """
    if output.data.size != 1:
        raise ContractError(f"backward needs a scalar root, got shape {output.shape}")
    grads: dict[int, np.ndarray] = {id(output): np.ones_like(output.data)}
    leaves: dict[int, Tensor] = {}
    produced = {id(node.output) for node in tape.nodes}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.output), None)
        if g is None:
            continue
        in_grads = node.op.backward(g, [t.data for t in node.inputs], node.output.data, **node.attrs)
        for t, gi in zip(node.inputs, in_grads):
            if gi is None or not t.requires_grad:
                continue
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
            if key not in produced:
                leaves[key] = t
    for key, t in leaves.items():
        t.grad = grads[key]
    if params is None:
        return None
    return [grads.get(id(p), np.zeros_like(p.data)) for p in params]


# --------------------------------------------------------------------------
# ops
# --------------------------------------------------------------------------


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: np.ndarray, b: np.ndarray, what: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{what}: cannot combine shapes {a.shape} and {b.shape}") from None


_ADD = Op(
    "add",
    lambda a, b: a + b,
    lambda g, xs, out: (_unbroadcast(g, xs[0].shape), _unbroadcast(g, xs[1].shape)),
)
_SUB = Op(
    "sub",
    lambda a, b: a - b,
    lambda g, xs, out: (_unbroadcast(g, xs[0].shape), _unbroadcast(-g, xs[1].shape)),
)
_MUL = Op(
    "mul",
    lambda a, b: a * b,
    lambda g, xs, out: (_unbroadcast(g * xs[1], xs[0].shape), _unbroadcast(g * xs[0], xs[1].shape)),
)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a.data, b.data, "add")
    return _apply(_ADD, (a, b))


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a.data, b.data, "sub")
    return _apply(_SUB, (a, b))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a.data, b.data, "mul")
    return _apply(_MUL, (a, b))


# subgradient at 0 is 0
_RELU = Op(
    "relu",
    lambda x: np.maximum(x, 0.0),
    lambda g, xs, out: (g * (xs[0] > 0.0),),
)


def relu(x: Tensor) -> Tensor:
    """Elementwise max(0, x)."""
    return _apply(_RELU, (x,))


_ABS = Op("abs", np.abs, lambda g, xs, out: (g * np.sign(xs[0]),))
_SQUARE = Op("square", np.square, lambda g, xs, out: (2.0 * g * xs[0],))


def abs_(x: Tensor) -> Tensor:
    return _apply(_ABS, (x,))


def square(x: Tensor) -> Tensor:
    return _apply(_SQUARE, (x,))


_MEAN = Op(
    "mean",
    lambda x: np.array([x.mean()]),
    lambda g, xs, out: (np.full(xs[0].shape, g[0] / xs[0].size),),
)


def mean(x: Tensor) -> Tensor:
    """Mean over all elements, returned as a one-element tensor."""
    return _apply(_MEAN, (x,))


def _concat_bwd(g, xs, out):
    m = xs[0].shape[-1]
    return g[..., :m], g[..., m:]


_CONCAT = Op("concat", lambda a, b: np.concatenate((a, b), axis=-1), _concat_bwd)


def concat(a: Tensor, b: Tensor) -> Tensor:
    """Stack two feature vectors end to end (along the last axis)."""
    if a.data.ndim != b.data.ndim or a.shape[:-1] != b.shape[:-1]:
        raise DimensionError(f"concat: incompatible shapes {a.shape} and {b.shape}")
    return _apply(_CONCAT, (a, b))


def _slice_bwd(g, xs, out, start, stop):
    full = np.zeros_like(xs[0])
    full[..., start:stop] = g
    return (full,)


_SLICE = Op("slice_cols", lambda x, start, stop: x[..., start:stop].copy(), _slice_bwd)


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    """Columns ``start:stop`` of the last axis."""
    n = x.shape[-1]
    if not 0 <= start < stop <= n:
        raise DimensionError(f"slice_cols: [{start}:{stop}] out of range for shape {x.shape}")
    return _apply(_SLICE, (x,), start=start, stop=stop)


def _rowdot_fwd(a, b):
    return np.sum(a * b, axis=-1, keepdims=True)


_ROWDOT = Op("rowdot", _rowdot_fwd, lambda g, xs, out: (g * xs[1], g * xs[0]))


def rowdot(a: Tensor, b: Tensor) -> Tensor:
    """Inner product along the last axis, keeping it as a length-1 axis."""
    if a.shape != b.shape:
        raise DimensionError(f"rowdot: shapes differ, {a.shape} vs {b.shape}")
    return _apply(_ROWDOT, (a, b))


def _softmax_fwd(x, temperature):
    z = x / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _softmax_bwd(g, xs, out, temperature):
    dot = np.sum(g * out, axis=-1, keepdims=True)
    return (out * (g - dot) / temperature,)


_SOFTMAX = Op("softmax", _softmax_fwd, _softmax_bwd)


def softmax_with_temperature(logits: Tensor, temperature: float) -> Tensor:
    """softmax(logits / temperature) along the last axis."""
    if not temperature > 0:
        raise ParameterError(f"softmax temperature must be > 0, got {temperature}")
    if logits.shape[-1] < 1:
        raise DimensionError("softmax over an empty axis")
    return _apply(_SOFTMAX, (logits,), temperature=float(temperature))


def _pair_softmax_fwd(a, b, temperature):
    za, zb = a / temperature, b / temperature
    m = np.maximum(za, zb)
    ea, eb = np.exp(za - m), np.exp(zb - m)
    return ea / (ea + eb)


def _pair_softmax_bwd(g, xs, out, temperature):
    d = g * out * (1.0 - out) / temperature
    return d, -d


_PAIR_SOFTMAX = Op("pair_softmax", _pair_softmax_fwd, _pair_softmax_bwd)


def pair_softmax(a: Tensor, b: Tensor, temperature: float = 1.0) -> Tensor:
    """Weight of ``a`` in a per-element two-way softmax between ``a`` and ``b``.

    ``pair_softmax(b, a, T)`` gives the complementary weight; the two sum to
    one elementwise.
    """
    if not temperature > 0:
        raise ParameterError(f"softmax temperature must be > 0, got {temperature}")
    if a.shape != b.shape:
        raise DimensionError(f"pair_softmax: shapes differ, {a.shape} vs {b.shape}")
    return _apply(_PAIR_SOFTMAX, (a, b), temperature=float(temperature))
