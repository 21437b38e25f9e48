"""Name-based construction of every network kind."""
from __future__ import annotations

from .baselines import MlpMulNetwork, MlpResNetwork
from .errors import ParameterError
from .models import INPUT_GROUPS, PennNetwork, PennSpec

MODEL_KINDS = ("mlp-res", "mlp-mul", "penn-fcf", "penn-bnf", "penn-abf", "penn-cawf")


def build_network(kind: str, width_multiplier: float = 1.0, seed: int = 0, input_dims=INPUT_GROUPS):
    kind = kind.lower()
    if kind == "mlp-res":
        return MlpResNetwork(seed=seed)
    if kind == "mlp-mul":
        return MlpMulNetwork(seed=seed)
    if kind.startswith("penn-"):
        spec = PennSpec(fusion=kind[5:], width_multiplier=width_multiplier, input_dims=input_dims)
        return PennNetwork(spec, seed=seed)
    raise ParameterError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def network_from_architecture(arch: dict, seed: int = 0):
    return build_network(
        arch["kind"],
        width_multiplier=arch.get("width_multiplier", 1.0),
        seed=seed,
        input_dims=tuple(arch.get("input_dims", INPUT_GROUPS)),
    )
