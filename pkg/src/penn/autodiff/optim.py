"""Adam updates and step-milestone learning-rate schedules."""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import DimensionError, ParameterError, Tensor

__all__ = ["Adam", "AdamState", "LrSchedule", "adam_step", "lr_at_epoch"]


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros_like(cls, params: Sequence[Tensor], **hyper) -> "AdamState":
        return cls(
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
            **hyper,
        )


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], state: AdamState, lr: float) -> AdamState:
    """Apply one bias-corrected Adam update in place and return ``state``."""
    if not lr > 0:
        raise ParameterError(f"learning rate must be > 0, got {lr}")
    if not (len(params) == len(grads) == len(state.m)):
        raise DimensionError(
            f"adam_step: {len(params)} params, {len(grads)} grads, {len(state.m)} moment slots"
        )
    for p, g, m in zip(params, grads, state.m):
        if p.data.shape != g.shape or m.shape != g.shape:
            raise DimensionError(f"adam_step: param {p.data.shape} vs grad {g.shape} vs moment {m.shape}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        tmp = np.multiply(g, 1.0 - b1)
        m *= b1
        m += tmp
        np.multiply(g, g, out=tmp)
        tmp *= 1.0 - b2
        v *= b2
        v += tmp
        # p -= lr * (m / bc1) / (sqrt(v / bc2) + eps)
        np.divide(v, bc2, out=tmp)
        np.sqrt(tmp, out=tmp)
        tmp += state.epsilon
        np.divide(m, tmp, out=tmp)
        tmp *= lr / bc1
        p.data -= tmp
    return state


class Adam:
    """Stateful Adam over a fixed parameter list.

    Parameter storage is packed into one contiguous buffer (each tensor's
    ``data`` becomes a view into it) so an update is a handful of vector ops
    instead of several per tensor. The arithmetic matches :func:`adam_step`.
    """

    def __init__(self, params: Sequence[Tensor], beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.params = list(params)
        sizes = [p.data.size for p in self.params]
        self._flat = np.empty(sum(sizes))
        offset = 0
        for p, n in zip(self.params, sizes):
            self._flat[offset : offset + n] = p.data.reshape(-1)
            p.data = self._flat[offset : offset + n].reshape(p.data.shape)
            offset += n
        self.state = AdamState([np.zeros_like(self._flat)], [np.zeros_like(self._flat)], 0, beta1, beta2, epsilon)

    def step(self, grads: Sequence[np.ndarray], lr: float) -> None:
        if len(grads) != len(self.params):
            raise DimensionError(f"Adam.step: {len(self.params)} params but {len(grads)} grads")
        for p, g in zip(self.params, grads):
            if p.data.shape != g.shape:
                raise DimensionError(f"Adam.step: param {p.data.shape} vs grad {g.shape}")
        flat_grad = np.concatenate([g.reshape(-1) for g in grads])
        adam_step([Tensor._wrap(self._flat, True)], [flat_grad], self.state, lr)


@dataclass(frozen=True)
class LrSchedule:
    initial_lr: float
    milestones: tuple[int, ...] = field(default_factory=tuple)
    decay_factor: float = 0.1

    def __post_init__(self):
        if not self.initial_lr > 0:
            raise ParameterError(f"initial_lr must be > 0, got {self.initial_lr}")
        if not 0 < self.decay_factor < 1:
            raise ParameterError(f"decay_factor must lie in (0, 1), got {self.decay_factor}")
        ms = tuple(int(m) for m in self.milestones)
        if list(ms) != sorted(ms):
            raise ParameterError(f"milestones must be sorted, got {ms}")
        object.__setattr__(self, "milestones", ms)

    def lr_at_epoch(self, epoch: int) -> float:
        if epoch < 0:
            raise ParameterError(f"epoch must be >= 0, got {epoch}")
        passed = bisect.bisect_right(self.milestones, epoch)
        return self.initial_lr * self.decay_factor**passed


def lr_at_epoch(schedule: LrSchedule, epoch: int) -> float:
    return schedule.lr_at_epoch(epoch)
