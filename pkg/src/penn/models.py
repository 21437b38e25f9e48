"""Physical-embedded network: component sub-networks, fusion chain, head.

Each engine component group gets its own small MLP. The overall-condition
embedding (the driving feature) is then fused, in flow order, with the
intake, HS/LS-channel and exhaust embeddings before a regression head emits
one scalar target.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .autodiff import (
    DenseLayer,
    Tensor,
    concat,
    he_init,
    pair_softmax,
    relu,
    rowdot,
    slice_cols,
    softmax_with_temperature,
)
from .errors import DimensionError, ParameterError, SchemaError

FUSION_KINDS = ("fcf", "bnf", "abf", "cawf")
INPUT_GROUPS = (3, 2, 11, 2)
SUBNET_NAMES = ("owcsn", "issn", "hlcsn", "essn")

SUBNET_WIDTHS = (32, 128)
BOTTLENECK_WIDTH = 32
ATTENTION_WIDTH = 16
HEAD_WIDTH = 32
ATTENTION_TEMPERATURE = 10.0
CHANNEL_TEMPERATURE = 1.0

SCALE_NAMES = {0.25: "Down4", 0.5: "Down2", 1.0: "", 2.0: "Up2", 4.0: "Up4"}


def scale_width(width: int, factor: float) -> int:
    """Round-half-up scaling with a floor of one node."""
    return max(1, int(math.floor(width * factor + 0.5)))


@dataclass(frozen=True)
class PennSpec:
    fusion: str = "bnf"
    width_multiplier: float = 1.0
    input_dims: tuple[int, int, int, int] = INPUT_GROUPS
    target: str = "thrust"

    def __post_init__(self):
        if self.fusion not in FUSION_KINDS:
            raise ParameterError(f"unknown fusion kind {self.fusion!r}; expected one of {FUSION_KINDS}")
        if not self.width_multiplier > 0:
            raise ParameterError(f"width_multiplier must be > 0, got {self.width_multiplier}")
        dims = tuple(int(d) for d in self.input_dims)
        if len(dims) != 4 or min(dims) < 1:
            raise ParameterError(f"input_dims needs four positive group sizes, got {self.input_dims}")
        object.__setattr__(self, "input_dims", dims)

    def width(self, base: int) -> int:
        return scale_width(base, self.width_multiplier)

    @property
    def feature_dim(self) -> int:
        return self.width(SUBNET_WIDTHS[1])

    @property
    def name(self) -> str:
        suffix = SCALE_NAMES.get(float(self.width_multiplier), f"x{self.width_multiplier:g}")
        base = f"PENN-{self.fusion.upper()}"
        return f"{base}-{suffix}" if suffix else base


def scale_model(spec: PennSpec, factor: float) -> PennSpec:
    """Multiply every hidden width by ``factor``; input dims stay fixed."""
    if not factor > 0:
        raise ParameterError(f"scale factor must be > 0, got {factor}")
    return replace(spec, width_multiplier=spec.width_multiplier * factor)


def partition_input(x: Tensor, input_dims=INPUT_GROUPS) -> tuple[Tensor, Tensor, Tensor, Tensor]:
    """Split the input row(s) into overall / intake / channel / exhaust groups."""
    total = sum(input_dims)
    if x.shape[-1] != total:
        raise SchemaError(f"expected {total} input features, got {x.shape[-1]}")
    groups = []
    start = 0
    for n in input_dims:
        groups.append(slice_cols(x, start, start + n))
        start += n
    return tuple(groups)


class Module:
    """Anything that owns dense layers."""

    def layers(self) -> list[DenseLayer]:
        raise NotImplementedError

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers() for p in layer.parameters()]

    @property
    def n_params(self) -> int:
        return sum(layer.n_params for layer in self.layers())


class SubNetwork(Module):
    """ReLU(FC_128(ReLU(FC_32(x)))) at unit width."""

    def __init__(self, input_dim: int, spec: PennSpec, name: str):
        self.input_dim = input_dim
        self.fc1 = DenseLayer(input_dim, spec.width(SUBNET_WIDTHS[0]), f"{name}.fc1")
        self.fc2 = DenseLayer(self.fc1.out_dim, spec.width(SUBNET_WIDTHS[1]), f"{name}.fc2")

    def layers(self):
        return [self.fc1, self.fc2]

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.input_dim:
            raise DimensionError(f"{self.fc1.name}: expected {self.input_dim} inputs, got shape {x.shape}")
        return relu(self.fc2(relu(self.fc1(x))))


def _check_pair(e_old: Tensor, z_c: Tensor, dim: int, who: str) -> None:
    if e_old.shape != z_c.shape or e_old.shape[-1] != dim:
        raise DimensionError(f"{who}: expected two inputs of width {dim}, got {e_old.shape} and {z_c.shape}")


class FullyConnectedFusion(Module):
    kind = "fcf"

    def __init__(self, spec: PennSpec, name: str):
        d = spec.feature_dim
        self.dim = d
        self.fc = DenseLayer(2 * d, d, f"{name}.fc")

    def layers(self):
        return [self.fc]

    def __call__(self, e_old: Tensor, z_c: Tensor) -> Tensor:
        _check_pair(e_old, z_c, self.dim, "FCF")
        return relu(self.fc(concat(e_old, z_c)))


class BottleneckFusion(Module):
    kind = "bnf"

    def __init__(self, spec: PennSpec, name: str):
        d = spec.feature_dim
        self.dim = d
        self.squeeze = DenseLayer(2 * d, spec.width(BOTTLENECK_WIDTH), f"{name}.squeeze")
        self.expand = DenseLayer(self.squeeze.out_dim, d, f"{name}.expand")

    def layers(self):
        return [self.squeeze, self.expand]

    def __call__(self, e_old: Tensor, z_c: Tensor) -> Tensor:
        _check_pair(e_old, z_c, self.dim, "BNF")
        return relu(self.expand(relu(self.squeeze(concat(e_old, z_c)))))


class AttentionFusion(Module):
    """Main input queries a two-slot memory built from both inputs.

    Key and value projections are shared between the two inputs; the score
    vector is scaled by 1/sqrt(query width) and passed through a softmax at
    temperature 10 before pooling the values.
    """

    kind = "abf"

    def __init__(self, spec: PennSpec, name: str):
        d = spec.feature_dim
        a = spec.width(ATTENTION_WIDTH)
        self.dim = d
        self.query = DenseLayer(d, a, f"{name}.query")
        self.key = DenseLayer(d, a, f"{name}.key")
        self.value = DenseLayer(d, a, f"{name}.value")
        self.out = DenseLayer(a, d, f"{name}.out")
        self.scale = 1.0 / math.sqrt(a)

    def layers(self):
        return [self.query, self.key, self.value, self.out]

    def attention(self, e_old: Tensor, z_c: Tensor) -> tuple[Tensor, Tensor]:
        """Return (attention weights over the two slots, pooled value e_att)."""
        _check_pair(e_old, z_c, self.dim, "ABF")
        q = self.query(e_old)
        k1, k2 = self.key(e_old), self.key(z_c)
        v1, v2 = self.value(e_old), self.value(z_c)
        scores = concat(rowdot(q, k1), rowdot(q, k2)) * self.scale
        w = softmax_with_temperature(scores, ATTENTION_TEMPERATURE)
        e_att = slice_cols(w, 0, 1) * v1 + slice_cols(w, 1, 2) * v2
        return w, e_att

    def __call__(self, e_old: Tensor, z_c: Tensor) -> Tensor:
        _, e_att = self.attention(e_old, z_c)
        return relu(e_old + self.out(e_att))


class ChannelWeightedFusion(Module):
    """Per-channel convex combination with content-dependent weights.

    Each input has its own bottleneck importance network; the two importance
    vectors are softmax-normalised channel by channel (temperature 1).
    """

    kind = "cawf"

    def __init__(self, spec: PennSpec, name: str):
        d = spec.feature_dim
        b = spec.width(BOTTLENECK_WIDTH)
        self.dim = d
        self.main_squeeze = DenseLayer(d, b, f"{name}.main_squeeze")
        self.main_expand = DenseLayer(b, d, f"{name}.main_expand")
        self.supp_squeeze = DenseLayer(d, b, f"{name}.supp_squeeze")
        self.supp_expand = DenseLayer(b, d, f"{name}.supp_expand")

    def layers(self):
        return [self.main_squeeze, self.main_expand, self.supp_squeeze, self.supp_expand]

    def importance(self, e_old: Tensor, z_c: Tensor) -> tuple[Tensor, Tensor]:
        _check_pair(e_old, z_c, self.dim, "CAWF")
        e_im = self.main_expand(relu(self.main_squeeze(e_old)))
        z_im = self.supp_expand(relu(self.supp_squeeze(z_c)))
        return e_im, z_im

    def weights(self, e_old: Tensor, z_c: Tensor) -> tuple[Tensor, Tensor]:
        e_im, z_im = self.importance(e_old, z_c)
        return (
            pair_softmax(e_im, z_im, CHANNEL_TEMPERATURE),
            pair_softmax(z_im, e_im, CHANNEL_TEMPERATURE),
        )

    def __call__(self, e_old: Tensor, z_c: Tensor) -> Tensor:
        w1, w2 = self.weights(e_old, z_c)
        return w1 * e_old + w2 * z_c


FUSION_MODULES = {
    "fcf": FullyConnectedFusion,
    "bnf": BottleneckFusion,
    "abf": AttentionFusion,
    "cawf": ChannelWeightedFusion,
}


class RegressionHead(Module):
    """FC_1(ReLU(FC_32(e))); the output is an unbounded scalar."""

    def __init__(self, in_dim: int, hidden: int, name: str = "head"):
        self.fc1 = DenseLayer(in_dim, hidden, f"{name}.fc1")
        self.fc2 = DenseLayer(hidden, 1, f"{name}.fc2")

    def layers(self):
        return [self.fc1, self.fc2]

    def __call__(self, e: Tensor) -> Tensor:
        return self.fc2(relu(self.fc1(e)))


class PennNetwork(Module):
    """Four component sub-networks, three fusion stages, one regression head.

    The fusion stages share a structure but each owns its parameters.
    Parameters are He-initialised from ``seed`` in declaration order.
    """

    def __init__(self, spec: PennSpec = PennSpec(), seed: int = 0):
        self.spec = spec
        self.subnets = [
            SubNetwork(dim, spec, name) for dim, name in zip(spec.input_dims, SUBNET_NAMES)
        ]
        fusion_cls = FUSION_MODULES[spec.fusion]
        self.fusions = [fusion_cls(spec, f"fusion{i + 1}") for i in range(3)]
        self.head = RegressionHead(spec.feature_dim, spec.width(HEAD_WIDTH))
        he_init(self.layers(), np.random.default_rng(seed))

    @property
    def kind(self) -> str:
        return f"penn-{self.spec.fusion}"

    @property
    def name(self) -> str:
        return self.spec.name

    def layers(self):
        out = []
        for sub in self.subnets:
            out.extend(sub.layers())
        for fusion in self.fusions:
            out.extend(fusion.layers())
        out.extend(self.head.layers())
        return out

    def features(self, x: Tensor) -> dict[str, Tensor]:
        """Intermediate features of one forward pass, keyed by stage."""
        groups = partition_input(x, self.spec.input_dims)
        z_drive, z1, z2, z3 = (sub(g) for sub, g in zip(self.subnets, groups))
        e1 = self.fusions[0](z_drive, z1)
        e2 = self.fusions[1](e1, z2)
        e_fusion = self.fusions[2](e2, z3)
        return {"z_drive": z_drive, "z1": z1, "z2": z2, "z3": z3, "e1": e1, "e2": e2, "e_fusion": e_fusion}

    def __call__(self, x: Tensor) -> Tensor:
        return self.head(self.features(x)["e_fusion"])

    def architecture(self) -> dict:
        return {
            "kind": self.kind,
            "width_multiplier": self.spec.width_multiplier,
            "input_dims": list(self.spec.input_dims),
        }


def penn_forward(model: PennNetwork, x: Tensor) -> Tensor:
    return model(x)


def count_params(model: Module) -> int:
    """Sum of (n_in + 1) * n_out over every dense layer."""
    return model.n_params
