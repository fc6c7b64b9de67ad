"""Weighted CART trees (Gini impurity) and bagged forests.

A fitted tree is stored as flat arrays so it serializes to JSON directly:
``feature[k] < 0`` marks a leaf whose ``value[k]`` is the weighted fraction
of positive rows reaching it.
"""
from __future__ import annotations

import math

import numpy as np


def _best_split(x, y, w, min_leaf):
    """Best threshold on one feature: (impurity, threshold) or None.

    Impurity is the weighted Gini of the two children, each weighted by its
    share of the node's total weight (lower is better).
    """
    order = np.argsort(x, kind="stable")
    xs, ys, ws = x[order], y[order], w[order]
    n = xs.size
    # candidate cut after position i (left = [0..i]) where the value changes
    valid = np.flatnonzero(xs[1:] > xs[:-1])
    if valid.size == 0:
        return None
    left_n = valid + 1
    ok = (left_n >= min_leaf) & (n - left_n >= min_leaf)
    valid = valid[ok]
    if valid.size == 0:
        return None
    cw = np.cumsum(ws)
    cp = np.cumsum(ws * ys)
    total_w, total_p = cw[-1], cp[-1]
    lw, lp = cw[valid], cp[valid]
    rw, rp = total_w - lw, total_p - lp
    # w * gini = w * 2 p (1 - p) = 2 pos (w - pos) / w
    imp = (2.0 * lp * (lw - lp) / lw + 2.0 * rp * (rw - rp) / rw) / total_w
    k = int(np.argmin(imp))
    i = valid[k]
    return float(imp[k]), 0.5 * (xs[i] + xs[i + 1])


def grow_tree(X, y, w, max_depth=None, min_leaf=1, max_features=None, rng=None):
    """Grow a CART tree; returns dict of flat node arrays.

    ``max_features`` features are drawn without replacement at every node
    (all of them when None).
    """
    n, p = X.shape
    feature, threshold, left, right, value = [], [], [], [], []
    max_depth = math.inf if max_depth is None else max_depth
    k_feat = p if max_features is None else max(1, min(p, int(max_features)))

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        wn, yn = w[idx], y[idx]
        wsum = wn.sum()
        pos = float(wn @ yn)
        value[node] = pos / wsum
        parent_imp = 2.0 * pos * (wsum - pos) / wsum / wsum
        if depth >= max_depth or idx.size < 2 * min_leaf or parent_imp <= 0.0:
            continue
        if k_feat < p:
            cand = np.sort(rng.choice(p, size=k_feat, replace=False))
        else:
            cand = range(p)
        best = None
        for j in cand:
            res = _best_split(X[idx, j], yn, wn, min_leaf)
            if res is not None and (best is None or res[0] < best[0]):
                best = (res[0], j, res[1])
        # zero-gain splits are allowed: XOR-like data needs them to reach purity
        if best is None:
            continue
        _, j, thr = best
        go_left = X[idx, j] <= thr
        li, ri = new_node(), new_node()
        feature[node], threshold[node] = int(j), float(thr)
        left[node], right[node] = li, ri
        stack.append((ri, idx[~go_left], depth + 1))
        stack.append((li, idx[go_left], depth + 1))

    return {
        "feature": np.array(feature, dtype=np.int64),
        "threshold": np.array(threshold, dtype=float),
        "left": np.array(left, dtype=np.int64),
        "right": np.array(right, dtype=np.int64),
        "value": np.array(value, dtype=float),
    }


def tree_score(tree, X) -> np.ndarray:
    feature, threshold = tree["feature"], tree["threshold"]
    left, right, value = tree["left"], tree["right"], tree["value"]
    node = np.zeros(X.shape[0], dtype=np.int64)
    active = feature[node] >= 0
    while active.any():
        rows = np.flatnonzero(active)
        nd = node[rows]
        go_left = X[rows, feature[nd]] <= threshold[nd]
        node[rows] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return value[node]


def resolve_max_features(spec, p: int) -> int:
    """Translate ``"sqrt"`` / ``"third"`` / an int into a feature count."""
    if spec is None:
        return p
    if spec == "sqrt":
        return max(1, int(math.floor(math.sqrt(p))))
    if spec == "third":
        return max(1, p // 3)
    return max(1, min(p, int(spec)))


def grow_forest(X, y, w, n_trees, max_depth, max_features, seed, min_leaf=1):
    """Bootstrap-aggregated trees; bootstrap counts multiply the row weights."""
    n = X.shape[0]
    children = np.random.SeedSequence(seed).spawn(n_trees)
    trees = []
    for child in children:
        rng = np.random.default_rng(child)
        counts = np.bincount(rng.integers(0, n, size=n), minlength=n)
        idx = np.flatnonzero(counts)
        trees.append(grow_tree(X[idx], y[idx], w[idx] * counts[idx], max_depth=max_depth,
                               min_leaf=min_leaf, max_features=max_features, rng=rng))
    return trees


def forest_score(trees, X) -> np.ndarray:
    return np.mean([tree_score(t, X) for t in trees], axis=0)
