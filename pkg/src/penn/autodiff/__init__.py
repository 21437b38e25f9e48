"""Tensor numerics, reverse-mode differentiation, layers and optimisers."""
from .layers import DenseLayer, fc_forward, he_init
from .plan import ForwardPlan
from .optim import Adam, AdamState, LrSchedule, adam_step, lr_at_epoch
from .tensor import (
    ContractError,
    DimensionError,
    ParameterError,
    Tape,
    Tensor,
    abs_,
    add,
    backward,
    concat,
    mean,
    mul,
    pair_softmax,
    relu,
    rowdot,
    slice_cols,
    softmax_with_temperature,
    square,
    sub,
)

__all__ = [
    "Adam",
    "AdamState",
    "ContractError",
    "DenseLayer",
    "DimensionError",
    "ForwardPlan",
    "LrSchedule",
    "ParameterError",
    "Tape",
    "Tensor",
    "abs_",
    "adam_step",
    "add",
    "backward",
    "concat",
    "fc_forward",
    "he_init",
    "lr_at_epoch",
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
