"""Weighted logistic regression and linear SVM on standardized features.

Both objectives average the per-row loss under the normalized row weights,
so an integer weight k is exactly equivalent to k copies of the row.
"""
from __future__ import annotations

import numpy as np


def standardize_stats(X, p):
    """Weighted column means and standard deviations (zero sd -> 1)."""
    mu = p @ X
    sd = np.sqrt(p @ (X - mu) ** 2)
    sd[sd <= 1e-12] = 1.0
    return mu, sd


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def fit_logistic(X, y, w, l2, learning_rate=1.0, iterations=500):
    """Minimize sum_i p_i logloss_i + l2/2 ||coef||^2 by Nesterov descent.

    The step is ``learning_rate / L`` with L the gradient's Lipschitz bound;
    the intercept is not penalized.  Returns (coef, intercept) in the
    original feature scale.
    """
    p = w / w.sum()
    mu, sd = standardize_stats(X, p)
    Z = np.hstack([(X - mu) / sd, np.ones((X.shape[0], 1))])
    d = Z.shape[1]
    H = (Z * p[:, None]).T @ Z
    L = 0.25 * float(np.linalg.eigvalsh(H)[-1]) + l2
    step = learning_rate / L
    reg = np.full(d, l2)
    reg[-1] = 0.0

    theta = np.zeros(d)
    prev = theta
    for k in range(iterations):
        look = theta + (k / (k + 3.0)) * (theta - prev)
        grad = Z.T @ (p * (_sigmoid(Z @ look) - y)) + reg * look
        prev, theta = theta, look - step * grad
    coef = theta[:-1] / sd
    intercept = theta[-1] - coef @ mu
    return coef, float(intercept)


def fit_linear_svm(X, y, w, margin_penalty, learning_rate=1.0, iterations=1000):
    """Minimize 1/2 ||coef||^2 + C sum_i p_i hinge_i by subgradient descent.

    Step size ``learning_rate / (k + 1)``; the iterate with the lowest
    objective is returned (original feature scale).
    """
    p = w / w.sum()
    mu, sd = standardize_stats(X, p)
    Z = np.hstack([(X - mu) / sd, np.ones((X.shape[0], 1))])
    t = 2.0 * y - 1.0
    C = margin_penalty
    d = Z.shape[1]
    reg = np.ones(d)
    reg[-1] = 0.0

    def objective(theta):
        hinge = np.maximum(0.0, 1.0 - t * (Z @ theta))
        return 0.5 * float(theta[:-1] @ theta[:-1]) + C * float(p @ hinge)

    theta = np.zeros(d)
    best, best_obj = theta, objective(theta)
    for k in range(iterations):
        active = t * (Z @ theta) < 1.0
        grad = reg * theta - C * (Z[active].T @ (p[active] * t[active]))
        theta = theta - (learning_rate / (k + 1.0)) * grad
        obj = objective(theta)
        if obj < best_obj:
            best, best_obj = theta, obj
    coef = best[:-1] / sd
    intercept = best[-1] - coef @ mu
    return coef, float(intercept)


def linear_margin(coef, intercept, X):
    return X @ coef + intercept


def logistic_score(coef, intercept, X):
    return _sigmoid(linear_margin(coef, intercept, X))
