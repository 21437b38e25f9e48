"""Training losses, the MAPE metric, and the thrust/impulse prediction policy."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .autodiff import Tensor, abs_, mean, mul, square, sub
from .errors import DimensionError, ParameterError, PolicyError

TARGETS = ("thrust", "impulse")


class LossKind(str, Enum):
    MSE = "mse"
    MAE = "mae"
    MARE = "mare"


@dataclass(frozen=True)
class PredictionPolicy:
    clamp_negative_thrust: bool = True
    drop_zero_impulse: bool = True
    mare_epsilon: float = 1e-9


DEFAULT_POLICY = PredictionPolicy()


def check_relative_targets(y: np.ndarray, epsilon: float = DEFAULT_POLICY.mare_epsilon) -> None:
    bad = np.flatnonzero(~(np.abs(y) > epsilon))
    if bad.size:
        raise PolicyError(
            f"relative error undefined: target at sample index {int(bad[0])} is {y.reshape(-1)[bad[0]]!r} "
            f"(|y| must exceed {epsilon}); {bad.size} such sample(s)"
        )


def loss(kind, y, y_hat: Tensor, epsilon: float = DEFAULT_POLICY.mare_epsilon) -> Tensor:
    """Mean loss of ``y_hat`` against constant targets ``y``.

    MSE = mean((y - y_hat)^2), MAE = mean|y - y_hat|, MARE = mean|(y - y_hat) / y|.
    The result is a one-element tensor differentiable with respect to ``y_hat``.
    """
    kind = LossKind(kind)
    y = np.asarray(y, dtype=np.float64).reshape(y_hat.shape)
    if y.size == 0:
        raise DimensionError("loss over an empty batch")
    residual = sub(y_hat, y)
    if kind is LossKind.MSE:
        return mean(square(residual))
    if kind is LossKind.MAE:
        return mean(abs_(residual))
    check_relative_targets(y, epsilon)
    return mean(abs_(mul(residual, 1.0 / y)))


def _as_pair(y, y_hat):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    y_hat = np.asarray(y_hat, dtype=np.float64).reshape(-1)
    if y.shape != y_hat.shape:
        raise DimensionError(f"target/prediction lengths differ: {y.shape} vs {y_hat.shape}")
    if y.size == 0:
        raise DimensionError("metric over an empty set")
    return y, y_hat


def mare(y, y_hat, epsilon: float = 0.0) -> float:
    y, y_hat = _as_pair(y, y_hat)
    check_relative_targets(y, epsilon)
    return float(np.mean(np.abs((y - y_hat) / y)))


def mape(y, y_hat) -> float:
    """Mean absolute percentage error, in percent."""
    return 100.0 * mare(y, y_hat)


def apply_policy(target_name: str, prediction, policy: PredictionPolicy = DEFAULT_POLICY):
    """Clamp negative thrust to zero; other targets pass through unchanged."""
    if target_name not in TARGETS:
        raise ParameterError(f"unknown target {target_name!r}; expected one of {TARGETS}")
    if target_name == "thrust" and policy.clamp_negative_thrust:
        return np.maximum(prediction, 0.0)
    return prediction
