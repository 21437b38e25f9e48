"""Fully connected layers and their initialisation."""
from __future__ import annotations

import numpy as np

from .tensor import DimensionError, Op, Tensor, _apply

__all__ = ["DenseLayer", "fc_forward", "he_init"]


def _fc_fwd(x, w, b):
    return x @ w.T + b


def _fc_bwd(g, xs, out):
    x, w, _ = xs
    gx = g @ w
    if x.ndim == 1:
        gw = np.outer(g, x)
        gb = g
    else:
        gw = g.T @ x
        gb = g.sum(axis=0)
    return gx, gw, gb


_FC = Op("fc", _fc_fwd, _fc_bwd)


class DenseLayer:
    """``y = W x + b`` with ``W`` of shape (out_dim, in_dim)."""

    def __init__(self, in_dim: int, out_dim: int, name: str = "fc"):
        if in_dim < 1 or out_dim < 1:
            raise DimensionError(f"layer dims must be positive, got {in_dim}->{out_dim}")
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self.name = name
        self.weights = Tensor(np.zeros((self.out_dim, self.in_dim)), requires_grad=True, name=f"{name}.weight")
        self.bias = Tensor(np.zeros(self.out_dim), requires_grad=True, name=f"{name}.bias")

    @property
    def n_params(self) -> int:
        return (self.in_dim + 1) * self.out_dim

    def parameters(self) -> list[Tensor]:
        return [self.weights, self.bias]

    def __call__(self, x: Tensor) -> Tensor:
        return fc_forward(x, self)

    def __repr__(self) -> str:
        return f"DenseLayer({self.in_dim}->{self.out_dim}, name={self.name!r})"


def fc_forward(x: Tensor, layer: DenseLayer) -> Tensor:
    if x.shape[-1] != layer.in_dim:
        raise DimensionError(
            f"{layer.name}: input shape {x.shape} does not match weight shape "
            f"{layer.weights.shape} (expects last dim {layer.in_dim})"
        )
    return _apply(_FC, (x, layer.weights, layer.bias))


def he_init(layers, rng: np.random.Generator) -> None:
    """Fan-in scaled normal weights (variance 2/fan_in), zero biases.

    Layers are filled in iteration order, so a fixed seed and a fixed
    architecture always give the same parameters.
    """
    for layer in layers:
        std = np.sqrt(2.0 / layer.in_dim)
        layer.weights.data[...] = rng.normal(0.0, std, size=(layer.out_dim, layer.in_dim))
        layer.bias.data[...] = 0.0
