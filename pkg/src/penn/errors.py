"""Exception types shared across the package."""
from .autodiff.tensor import ContractError, DimensionError, ParameterError


class SchemaError(ValueError):
    """Input data does not follow the 18-input / 2-output column contract."""


class PolicyError(ValueError):
    """A target violates the prediction policy (e.g. zero target under MARE)."""


class StatsError(ValueError):
    """Normalisation statistics cannot be formed (e.g. a constant feature)."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


__all__ = [
    "ContractError",
    "DimensionError",
    "DivergenceError",
    "ParameterError",
    "PolicyError",
    "SchemaError",
    "StatsError",
]
