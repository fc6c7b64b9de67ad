"""Bias mitigation on a binarized (privileged / unprivileged) attribute.

Preprocessing: :func:`reweigh` and :func:`dir_repair`.
In-processing: :func:`exgr_fit` (exponentiated-gradient reduction to
cost-sensitive classification) and :func:`metac_fit` (group-dependent
threshold search under a ratio constraint).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import DEFAULT_PRIVILEGED, Dataset
from .errors import (
    DegenerateScores,
    EmptyCell,
    NonNumericColumn,
    SingleClassTraining,
    UncoveredGroup,
)
from .models import ModelKind, TrainedModel, fit_arrays
from .models.base import check_threshold

log = logging.getLogger(__name__)

MITIGATIONS = ("Baseline", "ReW", "DIR", "ExGR", "MetaC")


@dataclass(frozen=True)
class BinaryGroupMap:
    privileged: tuple[str, ...] = DEFAULT_PRIVILEGED
    unprivileged: tuple[str, ...] | None = None

    def indicator(self, data: Dataset) -> np.ndarray:
        return binarize_groups(data, self)


def binarize_groups(data: Dataset, gmap: BinaryGroupMap | Sequence[str] = BinaryGroupMap()) -> np.ndarray:
    """Per-row s: 1 for privileged groups, 0 otherwise.

    Every group in the name table must fall on exactly one side, and both
    sides must be nonempty.
    """
    if not isinstance(gmap, BinaryGroupMap):
        gmap = BinaryGroupMap(tuple(gmap))
    names = set(data.group_names)
    priv = set(gmap.privileged)
    if unknown := priv - names:
        raise UncoveredGroup(f"privileged groups {sorted(unknown)} not in the group table")
    unpriv = names - priv if gmap.unprivileged is None else set(gmap.unprivileged)
    if unknown := unpriv - names:
        raise UncoveredGroup(f"unprivileged groups {sorted(unknown)} not in the group table")
    if not priv or not unpriv:
        raise UncoveredGroup("both the privileged and unprivileged side must be nonempty")
    if priv & unpriv:
        raise UncoveredGroup(f"groups {sorted(priv & unpriv)} are on both sides")
    if uncovered := names - priv - unpriv:
        raise UncoveredGroup(f"groups {sorted(uncovered)} are on neither side")
    codes = [k for k, g in enumerate(data.group_names) if g in priv]
    return np.isin(data.group, codes).astype(np.int64)


# ------------------------------------------------------------------ ReW

def reweigh(data: Dataset, s) -> np.ndarray:
    """Per-row weight N(s) N(y) / (N N(s, y)) from the row's (s, y) cell."""
    s = np.asarray(s).reshape(-1)
    y = data.outcome
    n = y.size
    w = np.empty(n)
    for sv in (0, 1):
        for yv in (0, 1):
            cell = (s == sv) & (y == yv)
            n_cell = int(cell.sum())
            if n_cell == 0:
                raise EmptyCell(sv, yv)
            w[cell] = (np.sum(s == sv) * np.sum(y == yv)) / (n * n_cell)
    return w


# ------------------------------------------------------------------ DIR

def _bucket_of_rank(n: int, n_buckets: int) -> np.ndarray:
    """Bucket index of each sorted position 0..n-1 (buckets fill in rank order)."""
    return (np.arange(n) * n_buckets) // n


def repair_column(x: np.ndarray, s: np.ndarray, lam: float) -> np.ndarray:
    """Move each group's values toward a shared median distribution.

    Every group's sorted values are dealt into B rank buckets, B being the
    smallest group size.  Bucket k's target is the median, across groups, of
    each group's median value in bucket k; a value in bucket k becomes
    ``(1 - lam) * x + lam * target_k``.  At ``lam = 1`` all groups put
    (nearly) equal mass on the same target values.
    """
    out = x.astype(float).copy()
    groups = list(np.unique(s))
    if lam == 0.0 or len(groups) < 2:
        return out
    members = {g: np.flatnonzero(s == g) for g in groups}
    n_buckets = min(idx.size for idx in members.values())
    order, bucket, reps = {}, {}, []
    for g in groups:
        idx = members[g]
        order[g] = idx[np.argsort(x[idx], kind="stable")]
        bucket[g] = _bucket_of_rank(idx.size, n_buckets)
        sorted_vals = x[order[g]]
        reps.append([np.median(sorted_vals[bucket[g] == k]) for k in range(n_buckets)])
    target = np.median(np.array(reps), axis=0)
    for g in groups:
        rows = order[g]
        out[rows] = (1.0 - lam) * x[rows] + lam * target[bucket[g]]
    return out


def _indicator_blocks(data: Dataset) -> list[list[int]]:
    blocks: dict[str, list[int]] = {}
    for j, (name, kind) in enumerate(zip(data.feature_names, data.feature_kinds)):
        if kind == "indicator":
            blocks.setdefault(name.split("=", 1)[0], []).append(j)
    return list(blocks.values())


def _repair_levels(X, cols, s, lam, rng):
    """Relabel one-hot rows so each group's level frequencies move toward the median."""
    codes = np.argmax(X[:, cols], axis=1)
    L = len(cols)
    groups = list(np.unique(s))
    freq = {g: np.bincount(codes[s == g], minlength=L) / np.sum(s == g) for g in groups}
    med = np.median([freq[g] for g in groups], axis=0)
    med = med / med.sum()
    for g in groups:
        idx = np.flatnonzero(s == g)
        m = idx.size
        want = (1 - lam) * freq[g] + lam * med
        target = np.floor(want * m).astype(int)
        rem = m - target.sum()
        target[np.argsort(-(want * m - target), kind="stable")[:rem]] += 1
        have = np.bincount(codes[idx], minlength=L)
        pool = []
        for lv in range(L):
            surplus = have[lv] - target[lv]
            if surplus > 0:
                rows = idx[codes[idx] == lv]
                pool.extend(rng.choice(rows, size=surplus, replace=False).tolist())
        pool = np.array(pool, dtype=np.int64)
        rng.shuffle(pool)
        k = 0
        for lv in range(L):
            deficit = target[lv] - have[lv]
            if deficit > 0:
                codes[pool[k:k + deficit]] = lv
                k += deficit
    X[:, cols] = np.eye(L)[codes]


def dir_repair(data: Dataset, s, lam: float = 1.0, columns=None,
               repair_indicators: bool = False, seed: int = 0) -> Dataset:
    """Disparate-impact repair of feature distributions across the groups in ``s``.

    ``columns`` (names or indices) defaults to every numeric feature.
    With ``repair_indicators`` one-hot blocks are also repaired by seeded
    relabeling of their level frequencies.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"repair amount must lie in [0, 1], got {lam}")
    s = np.asarray(s).reshape(-1)
    if columns is None:
        cols = [j for j, k in enumerate(data.feature_kinds) if k == "numeric"]
    else:
        cols = [data.feature_names.index(c) if isinstance(c, str) else int(c) for c in columns]
        for j in cols:
            if data.feature_kinds[j] != "numeric":
                raise NonNumericColumn(f"{data.feature_names[j]!r} is {data.feature_kinds[j]}")
    if lam == 0.0:
        return data
    X = np.array(data.features, copy=True)
    for j in cols:
        X[:, j] = repair_column(X[:, j], s, lam)
    if repair_indicators:
        rng = np.random.default_rng(seed)
        for block in _indicator_blocks(data):
            _repair_levels(X, block, s, lam, rng)
    return data.with_features(X)


# ----------------------------------------------------------------- ExGR

@dataclass(frozen=True)
class ConstantModel:
    """Predicts the same score for every row (best response when all relabels agree)."""

    value: float
    n_features: int

    def score(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.full(X.shape[0], float(self.value))

    def predict(self, X, threshold: float = 0.5):
        return (self.score(X) >= threshold).astype(np.int64)


@dataclass(frozen=True)
class RandomizedClassifier:
    """Mixture of models; its score is the weight-averaged member score."""

    members: tuple
    weights: tuple[float, ...]
    constraint: str = "SP"
    eps: float = 0.05
    violation: float | None = None
    converged: bool = True
    history: tuple = field(default=(), repr=False)
    threshold: float = 0.5

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(self.members) != w.size or w.size == 0:
            raise ValueError("need one weight per member")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be nonnegative and sum to 1")

    def score(self, X) -> np.ndarray:
        return sum(wt * m.score(X) for m, wt in zip(self.members, self.weights))

    def predict(self, X, threshold: float | None = None) -> np.ndarray:
        t = check_threshold(self.threshold if threshold is None else threshold)
        return (self.score(X) >= t).astype(np.int64)


def _moment_matrix(s, y, p, constraint):
    """Rows g_e such that g_e @ h = E[h | event e] - E[h | its conditioning event]."""
    rows = []
    if constraint == "SP":
        for a in (0, 1):
            ev = s == a
            rows.append(p * (ev / p[ev].sum() - 1.0))
    elif constraint == "EOdds":
        for b in (0, 1):
            cond = y == b
            pc = p[cond].sum()
            for a in (0, 1):
                ev = cond & (s == a)
                rows.append(p * (ev / p[ev].sum() - cond / pc))
    else:
        raise ValueError(f"unknown constraint {constraint!r}; use 'SP' or 'EOdds'")
    return np.array(rows)


def exgr_fit(kind, hp, data: Dataset, s, constraint: str = "SP", eps: float = 0.05,
             iterations: int = 50, bound: float | None = None, step: float = 0.5,
             seed: int = 0) -> RandomizedClassifier:
    """Exponentiated-gradient reduction for a binary attribute.

    Each round turns the current multipliers into per-row costs, fits the
    base learner on the cost-minimizing relabeled sample (weights = |cost
    difference|), and raises multipliers of violated constraints
    multiplicatively (total mass capped at ``bound``, default 1/eps).  Returns the uniform
    mixture of all rounds' models with its achieved training violation.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if bound is None:
        bound = 1.0 / eps
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    kind = ModelKind.parse(kind)
    s = np.asarray(s).reshape(-1)
    X, y = data.features, data.outcome.astype(float)
    if np.unique(y).size < 2:
        raise SingleClassTraining("training labels contain a single class")
    for a in (0, 1):
        if not np.any(s == a):
            raise EmptyCell(a, "any")
    if constraint == "EOdds":
        for a in (0, 1):
            for b in (0, 1):
                if not np.any((s == a) & (y == b)):
                    raise EmptyCell(a, b)
    p = data.weights / data.weights.sum()
    G = _moment_matrix(s, y, p, constraint)
    n_cons = 2 * G.shape[0]
    theta = np.zeros(n_cons)
    members, history = [], []
    for t in range(iterations):
        lam = bound * np.exp(theta) / (1.0 + np.exp(theta).sum())
        lam_signed = lam[0::2] - lam[1::2]
        cost = p * (1.0 - 2.0 * y) + lam_signed @ G
        relabel = (cost < 0).astype(float)
        weight = np.abs(cost)
        keep = weight > 0
        if np.unique(relabel[keep]).size < 2:
            model = ConstantModel(float(relabel[keep][0]) if keep.any() else 0.0, X.shape[1])
        else:
            model = fit_arrays(kind, hp, X[keep], relabel[keep], weight[keep] / weight[keep].sum(),
                               seed=seed + t)
        h = model.predict(X).astype(float)
        gamma = G @ h
        viol = np.empty(n_cons)
        viol[0::2], viol[1::2] = gamma - eps, -gamma - eps
        theta = theta + step * viol
        members.append(model)
        history.append(float(np.abs(gamma).max()))
    n = len(members)
    mix = RandomizedClassifier(tuple(members), tuple([1.0 / n] * n), constraint, eps)
    achieved = float(np.abs(G @ mix.predict(X)).max())
    converged = achieved <= eps
    if not converged:
        log.info("ExGR: achieved violation %.4f exceeds eps %.4f after %d rounds", achieved, eps, n)
    return RandomizedClassifier(mix.members, mix.weights, constraint, eps, achieved,
                                converged, tuple(history))


# ---------------------------------------------------------------- MetaC

@dataclass(frozen=True)
class MetaClassifier:
    """Score model plus one decision threshold per binarized group."""

    base: TrainedModel
    thresholds: tuple[float, float]
    metric: str
    tau: float
    feasible: bool
    achieved_ratio: float
    train_accuracy: float

    def score(self, X) -> np.ndarray:
        return self.base.score(X)

    def predict(self, X, s) -> np.ndarray:
        sc = self.base.score(X)
        s = np.asarray(s).reshape(-1)
        t = np.where(s == 1, self.thresholds[1], self.thresholds[0])
        return (sc >= t).astype(np.int64)


def _threshold_table(sc, y, w, grid):
    """Weighted (predicted positive, true positive, false positive) mass per threshold."""
    order = np.argsort(sc, kind="stable")
    sc, y, w = sc[order], y[order], w[order]
    # mass with score >= t: suffix sums starting at searchsorted(t)
    suf_w = np.r_[np.cumsum(w[::-1])[::-1], 0.0]
    suf_tp = np.r_[np.cumsum((w * y)[::-1])[::-1], 0.0]
    start = np.searchsorted(sc, grid, side="left")
    pp, tp = suf_w[start], suf_tp[start]
    return pp, tp, pp - tp


def ratio(a, b) -> float:
    hi = max(a, b)
    return 1.0 if hi <= 0 else min(a, b) / hi


def metac_fit(data: Dataset, s, metric: str = "sr", tau: float = 0.8, grid_resolution: int = 51,
              kind=ModelKind.LOGISTIC_REGRESSION, hp=None, seed: int = 0) -> MetaClassifier:
    """Accuracy-optimal group thresholds subject to a ratio constraint >= tau.

    ``metric`` is ``"sr"`` (statistical rate: min/max of positive-prediction
    rates) or ``"fdr"`` (min/max of false discovery rates).  When no grid
    point reaches ``tau`` the point of maximal ratio is returned with
    ``feasible=False``.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if metric not in ("sr", "fdr"):
        raise ValueError(f"unknown metric {metric!r}; use 'sr' or 'fdr'")
    if grid_resolution < 2:
        raise ValueError("grid_resolution must be >= 2")
    s = np.asarray(s).reshape(-1)
    base = fit_arrays(kind, hp, data.features, data.outcome, data.weights, seed=seed)
    sc = base.score(data.features)
    if np.ptp(sc) <= 1e-12:
        raise DegenerateScores("score model is constant on the training data")
    y = data.outcome.astype(float)
    w = data.weights / data.weights.sum()
    grid = np.linspace(0.0, 1.0, grid_resolution)

    acc_part, stat = [], []
    for a in (0, 1):
        sel = s == a
        if not sel.any():
            raise EmptyCell(a, "any")
        pp, tp, fp = _threshold_table(sc[sel], y[sel], w[sel], grid)
        mass, pos = w[sel].sum(), (w[sel] * y[sel]).sum()
        correct = tp + (mass - pos - fp)
        acc_part.append(correct)
        if metric == "sr":
            stat.append(pp / mass)
        else:
            with np.errstate(invalid="ignore", divide="ignore"):
                stat.append(np.where(pp > 0, fp / np.where(pp > 0, pp, 1.0), 0.0))

    acc = acc_part[0][:, None] + acc_part[1][None, :]
    r0, r1 = stat[0][:, None], stat[1][None, :]
    hi = np.maximum(r0, r1)
    with np.errstate(invalid="ignore", divide="ignore"):
        rat = np.where(hi > 0, np.minimum(r0, r1) / np.where(hi > 0, hi, 1.0), 1.0)
    spread = np.abs(grid[:, None] - grid[None, :])

    feasible = rat >= tau - 1e-12
    if feasible.any():
        masked = np.where(feasible, acc, -np.inf)
        cand = masked >= masked.max() - 1e-12
    else:
        cand = rat >= rat.max() - 1e-12
        cand &= np.where(cand, acc, -np.inf) >= np.where(cand, acc, -np.inf).max() - 1e-12
    # ties: closest thresholds first, then lowest t0
    flat = np.flatnonzero(cand.ravel())
    i0, i1 = np.unravel_index(flat[np.lexsort((flat, spread.ravel()[flat]))[0]], acc.shape)
    return MetaClassifier(base, (float(grid[i0]), float(grid[i1])), metric, tau,
                          bool(feasible.any()), float(rat[i0, i1]), float(acc[i0, i1]))
