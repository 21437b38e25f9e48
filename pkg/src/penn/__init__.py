"""Physical-embedded neural networks for aeroengine performance prediction."""
from .estimators import MLPMulRegressor, MLPResRegressor, PENNRegressor, make_regressor
from .models import PennNetwork, PennSpec, count_params, scale_model
from .networks import MODEL_KINDS, build_network

__version__ = "0.1.0"

__all__ = [
    "MLPMulRegressor",
    "MLPResRegressor",
    "MODEL_KINDS",
    "PENNRegressor",
    "PennNetwork",
    "PennSpec",
    "build_network",
    "count_params",
    "make_regressor",
    "scale_model",
]
