"""Stratified k-fold cross-validation over hyperparameter grids."""
from __future__ import annotations

import itertools

import numpy as np

from ..errors import EmptyGrid, FoldClassCollapse
from .base import (
    ForestParams,
    Hyperparams,
    LogisticParams,
    ModelKind,
    SVMParams,
    TreeParams,
    fit,
    make_params,
    predict,
)


def default_grid(kind) -> list[Hyperparams]:
    kind = ModelKind.parse(kind)
    if kind is ModelKind.DECISION_TREE:
        return [TreeParams(d, m) for d, m in itertools.product((3, 5, 8, 12), (1, 5, 20))]
    if kind is ModelKind.RANDOM_FOREST:
        return [ForestParams(t, d, f)
                for t, d, f in itertools.product((50, 100), (5, 8, 12), ("sqrt", "third"))]
    if kind is ModelKind.LOGISTIC_REGRESSION:
        return [LogisticParams(l2) for l2 in (0.0001, 0.001, 0.01, 0.1)]
    return [SVMParams(c) for c in (0.01, 0.1, 1.0, 10.0)]


def stratified_folds(data, k: int, seed: int) -> np.ndarray:
    """Fold id per row.

    Rows are shuffled within each (group, outcome) stratum, the strata are
    concatenated in a fixed order, and fold ids are dealt round-robin, so
    fold sizes differ by at most one and every stratum is spread evenly.
    """
    rng = np.random.default_rng(seed)
    order = []
    for g in np.unique(data.group):
        for y in (0, 1):
            idx = np.flatnonzero((data.group == g) & (data.outcome == y))
            order.append(idx[rng.permutation(idx.size)])
    order = np.concatenate(order) if order else np.empty(0, dtype=np.int64)
    folds = np.empty(data.n_rows, dtype=np.int64)
    folds[order] = np.arange(order.size) % k
    return folds


def cv_scores(kind, grid, data, k: int = 5, seed: int = 0) -> list[float]:
    """Mean validation accuracy of every grid entry."""
    if k < 2:
        raise ValueError("k must be >= 2")
    grid = [make_params(kind, hp) for hp in grid]
    if not grid:
        raise EmptyGrid("hyperparameter grid is empty")
    folds = stratified_folds(data, k, seed)
    splits = []
    for f in range(k):
        val = np.flatnonzero(folds == f)
        trn = np.flatnonzero(folds != f)
        for part, name in ((val, "validation"), (trn, "training")):
            if np.unique(data.outcome[part]).size < 2:
                raise FoldClassCollapse(f"fold {f}: {name} part lacks an outcome class")
        splits.append((data.take(trn), data.take(val)))
    scores = []
    for hp in grid:
        accs = []
        for f, (trn, val) in enumerate(splits):
            model = fit(kind, hp, trn, seed=seed + f)
            accs.append(float(np.mean(predict(model, val.features) == val.outcome)))
        scores.append(float(np.mean(accs)))
    return scores


def cross_validate(kind, grid, data, k: int = 5, seed: int = 0) -> Hyperparams:
    """Grid entry with the best mean k-fold validation accuracy (first on ties)."""
    grid = [make_params(kind, hp) for hp in grid]
    scores = cv_scores(kind, grid, data, k, seed)
    return grid[int(np.argmax(scores))]
