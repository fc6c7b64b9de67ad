"""Model kinds, hyperparameters, and the fit/score/predict surface."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Union

import numpy as np

from ..errors import DimensionMismatch, NonPositiveWeight, SingleClassTraining
from . import linear, tree


class ModelKind(str, Enum):
    DECISION_TREE = "DecisionTree"
    RANDOM_FOREST = "RandomForest"
    LOGISTIC_REGRESSION = "LogisticRegression"
    LINEAR_SVM = "LinearSVM"

    @classmethod
    def parse(cls, name) -> "ModelKind":
        if isinstance(name, cls):
            return name
        aliases = {"dt": cls.DECISION_TREE, "rf": cls.RANDOM_FOREST,
                   "lr": cls.LOGISTIC_REGRESSION, "svm": cls.LINEAR_SVM}
        key = str(name)
        if key.lower() in aliases:
            return aliases[key.lower()]
        return cls(key)

    @property
    def short(self) -> str:
        return {"DecisionTree": "DT", "RandomForest": "RF",
                "LogisticRegression": "LR", "LinearSVM": "SVM"}[self.value]


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = 5
    min_leaf: int = 1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = 8
    features_per_split: Union[int, str] = "sqrt"
    min_leaf: int = 1


@dataclass(frozen=True)
class LogisticParams:
    l2_strength: float = 0.001
    learning_rate: float = 1.0
    iterations: int = 500


@dataclass(frozen=True)
class SVMParams:
    margin_penalty: float = 1.0
    learning_rate: float = 1.0
    iterations: int = 1000


Hyperparams = Union[TreeParams, ForestParams, LogisticParams, SVMParams]

PARAMS_FOR = {
    ModelKind.DECISION_TREE: TreeParams,
    ModelKind.RANDOM_FOREST: ForestParams,
    ModelKind.LOGISTIC_REGRESSION: LogisticParams,
    ModelKind.LINEAR_SVM: SVMParams,
}


def make_params(kind, values: dict | Hyperparams | None = None) -> Hyperparams:
    kind = ModelKind.parse(kind)
    cls = PARAMS_FOR[kind]
    if values is None:
        hp = cls()
    elif isinstance(values, cls):
        hp = values
    else:
        hp = cls(**values)
    _check_params(hp)
    return hp


def _check_params(hp: Hyperparams) -> None:
    if isinstance(hp, (TreeParams, ForestParams)):
        if hp.max_depth is not None and hp.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if hp.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
    if isinstance(hp, ForestParams):
        if hp.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        fps = hp.features_per_split
        if not (fps in ("sqrt", "third") or (isinstance(fps, int) and fps >= 1)):
            raise ValueError(f"features_per_split must be 'sqrt', 'third' or a positive int, got {fps!r}")
    if isinstance(hp, LogisticParams) and (hp.l2_strength < 0 or hp.learning_rate <= 0 or hp.iterations < 1):
        raise ValueError(f"invalid logistic hyperparameters {hp}")
    if isinstance(hp, SVMParams) and (hp.margin_penalty <= 0 or hp.learning_rate <= 0 or hp.iterations < 1):
        raise ValueError(f"invalid SVM hyperparameters {hp}")


@dataclass(frozen=True)
class TrainedModel:
    """A fitted classifier.  ``score`` is in [0, 1]; ``predict`` thresholds it."""

    kind: ModelKind
    hyperparams: Hyperparams
    params: dict = field(repr=False)
    n_features: int
    threshold: float = 0.5
    seed: int = 0

    def score(self, X) -> np.ndarray:
        return score(self, X)

    def predict(self, X, threshold: float | None = None) -> np.ndarray:
        return predict(self, X, self.threshold if threshold is None else threshold)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "hyperparams": asdict(self.hyperparams),
            "params": _jsonable(self.params),
            "n_features": self.n_features,
            "threshold": self.threshold,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        kind = ModelKind(d["kind"])
        return cls(kind, make_params(kind, d["hyperparams"]), _from_jsonable(kind, d["params"]),
                   d["n_features"], d["threshold"], d["seed"])

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        return cls.from_dict(json.loads(text))


def _jsonable(obj: Any):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _tree_arrays(t):
    return {
        "feature": np.asarray(t["feature"], dtype=np.int64),
        "threshold": np.asarray(t["threshold"], dtype=float),
        "left": np.asarray(t["left"], dtype=np.int64),
        "right": np.asarray(t["right"], dtype=np.int64),
        "value": np.asarray(t["value"], dtype=float),
    }


def _from_jsonable(kind: ModelKind, params: dict) -> dict:
    if kind is ModelKind.DECISION_TREE:
        return {"tree": _tree_arrays(params["tree"])}
    if kind is ModelKind.RANDOM_FOREST:
        return {"trees": [_tree_arrays(t) for t in params["trees"]]}
    return {"coef": np.asarray(params["coef"], dtype=float), "intercept": float(params["intercept"])}


def _check_training(X, y, w):
    if X.shape[0] == 0:
        raise SingleClassTraining("no training rows")
    if np.any(~(w > 0)):
        raise NonPositiveWeight("all sample weights must be positive")
    if np.unique(y).size < 2:
        raise SingleClassTraining("training labels contain a single class")


def fit_arrays(kind, hp: Hyperparams | dict | None, X, y, w=None, seed: int = 0,
               threshold: float = 0.5) -> TrainedModel:
    """Fit on raw arrays; :func:`fit` is the Dataset-level wrapper."""
    kind = ModelKind.parse(kind)
    hp = make_params(kind, hp)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    w = np.ones(X.shape[0]) if w is None else np.asarray(w, dtype=float).reshape(-1)
    _check_training(X, y, w)
    if kind is ModelKind.DECISION_TREE:
        params = {"tree": tree.grow_tree(X, y, w, hp.max_depth, hp.min_leaf)}
    elif kind is ModelKind.RANDOM_FOREST:
        k = tree.resolve_max_features(hp.features_per_split, X.shape[1])
        params = {"trees": tree.grow_forest(X, y, w, hp.n_trees, hp.max_depth, k, seed, hp.min_leaf)}
    elif kind is ModelKind.LOGISTIC_REGRESSION:
        coef, b = linear.fit_logistic(X, y, w, hp.l2_strength, hp.learning_rate, hp.iterations)
        params = {"coef": coef, "intercept": b}
    else:
        coef, b = linear.fit_linear_svm(X, y, w, hp.margin_penalty, hp.learning_rate, hp.iterations)
        params = {"coef": coef, "intercept": b}
    return TrainedModel(kind, hp, params, X.shape[1], threshold, seed)


def fit(kind, hp, data, seed: int = 0) -> TrainedModel:
    """Fit ``kind`` on a Dataset, honoring its per-row weights."""
    return fit_arrays(kind, hp, data.features, data.outcome, data.weights, seed)


def score(model: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.n_features:
        raise DimensionMismatch(f"model expects {model.n_features} features, got {X.shape[1]}")
    prm = model.params
    if model.kind is ModelKind.DECISION_TREE:
        s = tree.tree_score(prm["tree"], X)
    elif model.kind is ModelKind.RANDOM_FOREST:
        s = tree.forest_score(prm["trees"], X)
    else:
        # SVM margins go through the same logistic squash
        s = linear.logistic_score(prm["coef"], prm["intercept"], X)
    s = np.clip(s, 0.0, 1.0)
    return s[0] if single else s


def check_threshold(threshold: float) -> float:
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return threshold


def predict(model: TrainedModel, X, threshold: float = 0.5) -> np.ndarray:
    """Label 1 iff score >= threshold."""
    check_threshold(threshold)
    return (np.asarray(score(model, X)) >= threshold).astype(np.int64)
