from .base import (
    ForestParams,
    Hyperparams,
    LogisticParams,
    ModelKind,
    SVMParams,
    TrainedModel,
    TreeParams,
    fit,
    fit_arrays,
    make_params,
    predict,
    score,
)
from .selection import cross_validate, cv_scores, default_grid, stratified_folds

__all__ = [
    "ForestParams", "Hyperparams", "LogisticParams", "ModelKind", "SVMParams",
    "TrainedModel", "TreeParams", "fit", "fit_arrays", "make_params", "predict",
    "score", "cross_validate", "cv_scores", "default_grid", "stratified_folds",
]
