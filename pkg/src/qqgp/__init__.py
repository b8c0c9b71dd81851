"""Latent-variable Gaussian processes for mixed qualitative and quantitative inputs."""

from ._backend import active as active_backend, available as available_backends, set_backend
from .core import (
    Dataset,
    FactorKind,
    FittedModel,
    FullParams,
    MixedInput,
    ModelConfig,
    NumericalError,
    QQGPError,
    QualFactorParams,
    QualKernel,
    Structure,
    ValidationError,
)
from .fit import fit_model
from .predict import Prediction, predict, predict_point, rrmse
from .select import bic, bic_average, bic_select, loocv_score, loocv_select

__all__ = [
    "Dataset", "FactorKind", "FittedModel", "FullParams", "MixedInput", "ModelConfig",
    "NumericalError", "Prediction", "QQGPError", "QualFactorParams", "QualKernel",
    "Structure", "ValidationError", "active_backend", "available_backends", "bic",
    "bic_average", "bic_select", "fit_model", "loocv_score", "loocv_select", "predict",
    "predict_point", "rrmse", "set_backend",
]
