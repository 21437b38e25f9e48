"""Gradient-free replay of a traced forward pass."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import ContractError, Tape, Tensor

__all__ = ["ForwardPlan"]


class ForwardPlan:
    """A forward pass recorded once and replayed on raw arrays.

    Tracing runs ``fn`` on an example input under a tape. Calling the plan
    re-executes the recorded op forwards in the same order, skipping tensor
    wrapping and tape bookkeeping, so outputs are bitwise identical to
    ``fn(Tensor(x)).data``. Parameters are read at call time, so later updates
    are seen; the input must keep the traced shape.
    """

    def __init__(self, fn: Callable[[Tensor], Tensor], example):
        x = Tensor(np.array(example, dtype=np.float64), requires_grad=True)
        with Tape() as tape:
            out = fn(x)
        if not tape.nodes or tape.nodes[-1].output is not out:
            raise ContractError("traced function must end in a recorded op that depends on its input")
        slots = {id(x): 0}
        steps = []
        for i, node in enumerate(tape.nodes, start=1):
            refs = tuple(slots.get(id(t), t) for t in node.inputs)
            slots[id(node.output)] = i
            steps.append((node.op.forward, refs, node.attrs))
        self.input_shape = x.shape
        self._steps = steps

    def __len__(self) -> int:
        return len(self._steps)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.input_shape:
            raise ContractError(f"plan traced for input shape {self.input_shape}, got {x.shape}")
        vals = [x]
        for forward, refs, attrs in self._steps:
            args = [vals[r] if r.__class__ is int else r.data for r in refs]
            vals.append(forward(*args, **attrs))
        return vals[-1]
