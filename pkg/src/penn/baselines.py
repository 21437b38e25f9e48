"""Generalised MLP baselines that consume all 18 inputs at once."""
from __future__ import annotations

import numpy as np

from .autodiff import DenseLayer, Tensor, concat, he_init, relu
from .errors import DimensionError
from .models import Module

N_INPUTS = 18

# Widths solved against the parameter budgets (about 100k and 84k).
RES_WIDTH = 192
RES_BOTTLENECK = 64
RES_TAIL = 48
MUL_BRANCH_WIDTHS = (128, 128)
MUL_TRUNK_WIDTH = 180


class ResidualBlock(Module):
    """relu(x + FC(relu(FC_bottleneck(x))))."""

    def __init__(self, width: int, bottleneck: int, name: str):
        self.squeeze = DenseLayer(width, bottleneck, f"{name}.squeeze")
        self.expand = DenseLayer(bottleneck, width, f"{name}.expand")

    def layers(self):
        return [self.squeeze, self.expand]

    def __call__(self, x: Tensor) -> Tensor:
        return relu(x + self.expand(relu(self.squeeze(x))))


def _check_inputs(x: Tensor, who: str) -> None:
    if x.shape[-1] != N_INPUTS:
        raise DimensionError(f"{who}: expected {N_INPUTS} inputs, got shape {x.shape}")


class MlpResNetwork(Module):
    """Eight dense layers with two bottleneck residual blocks."""

    kind = "mlp-res"
    name = "MLP-Res"

    def __init__(self, seed: int = 0):
        self.stem = DenseLayer(N_INPUTS, RES_WIDTH, "res.stem")
        self.hidden = DenseLayer(RES_WIDTH, RES_WIDTH, "res.hidden")
        self.blocks = [ResidualBlock(RES_WIDTH, RES_BOTTLENECK, f"res.block{i + 1}") for i in range(2)]
        self.tail = DenseLayer(RES_WIDTH, RES_TAIL, "res.tail")
        self.out = DenseLayer(RES_TAIL, 1, "res.out")
        he_init(self.layers(), np.random.default_rng(seed))

    def layers(self):
        out = [self.stem, self.hidden]
        for block in self.blocks:
            out.extend(block.layers())
        return out + [self.tail, self.out]

    def __call__(self, x: Tensor) -> Tensor:
        _check_inputs(x, self.name)
        h = relu(self.hidden(relu(self.stem(x))))
        for block in self.blocks:
            h = block(h)
        return self.out(relu(self.tail(h)))

    def architecture(self) -> dict:
        return {"kind": self.kind}


class MlpMulNetwork(Module):
    """Two parallel two-layer branches, concatenated, then a two-layer trunk."""

    kind = "mlp-mul"
    name = "MLP-Mul"

    def __init__(self, seed: int = 0):
        w1, w2 = MUL_BRANCH_WIDTHS
        self.branches = [
            (DenseLayer(N_INPUTS, w1, f"mul.branch{i}.fc1"), DenseLayer(w1, w2, f"mul.branch{i}.fc2"))
            for i in (1, 2)
        ]
        self.trunk = DenseLayer(2 * w2, MUL_TRUNK_WIDTH, "mul.trunk")
        self.out = DenseLayer(MUL_TRUNK_WIDTH, 1, "mul.out")
        he_init(self.layers(), np.random.default_rng(seed))

    def layers(self):
        out = [layer for branch in self.branches for layer in branch]
        return out + [self.trunk, self.out]

    def branch_features(self, x: Tensor) -> list[Tensor]:
        _check_inputs(x, self.name)
        return [relu(fc2(relu(fc1(x)))) for fc1, fc2 in self.branches]

    def __call__(self, x: Tensor) -> Tensor:
        a, b = self.branch_features(x)
        return self.out(relu(self.trunk(concat(a, b))))

    def architecture(self) -> dict:
        return {"kind": self.kind}


def mlp_res_forward(model: MlpResNetwork, x: Tensor) -> Tensor:
    return model(x)


def mlp_mul_forward(model: MlpMulNetwork, x: Tensor) -> Tensor:
    return model(x)
