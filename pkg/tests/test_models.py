import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_dataset, two_blobs
from edufair.errors import (
    DimensionMismatch,
    EmptyGrid,
    FoldClassCollapse,
    NonPositiveWeight,
    SingleClassTraining,
)
from edufair.models import (
    ForestParams,
    LogisticParams,
    ModelKind,
    SVMParams,
    TrainedModel,
    TreeParams,
    cross_validate,
    cv_scores,
    default_grid,
    fit,
    fit_arrays,
    make_params,
    stratified_folds,
)
from edufair.models.linear import fit_logistic

KINDS = list(ModelKind)
FAST = {
    ModelKind.DECISION_TREE: TreeParams(5),
    ModelKind.RANDOM_FOREST: ForestParams(20, 5),
    ModelKind.LOGISTIC_REGRESSION: LogisticParams(),
    ModelKind.LINEAR_SVM: SVMParams(),
}


def _xor(n_side=10):
    pts = [(a, b) for a in range(n_side) for b in range(n_side)]
    X = np.array(pts, dtype=float)
    y = ((X[:, 0] < n_side / 2) ^ (X[:, 1] < n_side / 2)).astype(int)
    return X, y


# ------------------------------------------------------------------ parsing

@pytest.mark.parametrize("alias,kind", [("dt", ModelKind.DECISION_TREE), ("RF", ModelKind.RANDOM_FOREST),
                                        ("LogisticRegression", ModelKind.LOGISTIC_REGRESSION),
                                        ("svm", ModelKind.LINEAR_SVM)])
def test_kind_aliases(alias, kind):
    assert ModelKind.parse(alias) is kind


def test_make_params_validation():
    with pytest.raises(ValueError):
        make_params("dt", {"min_leaf": 0})
    with pytest.raises(ValueError):
        make_params("rf", {"features_per_split": "half"})
    with pytest.raises(ValueError):
        make_params("svm", {"margin_penalty": 0})
    assert make_params("lr", {"l2_strength": 0.1}).l2_strength == 0.1


# ------------------------------------------------------------------ fitting

@pytest.mark.parametrize("kind", KINDS)
def test_separable_blobs_fit_perfectly(kind):
    data = two_blobs()
    model = fit(kind, FAST[kind], data, seed=0)
    assert np.all(model.predict(data.features) == data.outcome)


@pytest.mark.parametrize("kind", KINDS)
def test_single_class_rejected(kind):
    X = np.random.default_rng(0).standard_normal((10, 2))
    with pytest.raises(SingleClassTraining):
        fit_arrays(kind, None, X, np.ones(10))


def test_nonpositive_weight_rejected():
    X, y = _xor(4)
    w = np.ones(len(y))
    w[3] = 0.0
    with pytest.raises(NonPositiveWeight):
        fit_arrays("lr", None, X, y, w)


def test_unbounded_tree_reaches_purity_on_xor():
    # the root split has zero Gini gain; the tree must still be allowed to take it
    X, y = _xor()
    model = fit_arrays("dt", TreeParams(None), X, y)
    assert np.all(model.predict(X) == y)


def test_stump_depth_zero_is_constant():
    X, y = _xor()
    model = fit_arrays("dt", TreeParams(0), X, y)
    s = model.score(X)
    assert np.all(s == s[0]) and s[0] == pytest.approx(y.mean())


@pytest.mark.parametrize("kind", [ModelKind.LOGISTIC_REGRESSION, ModelKind.LINEAR_SVM])
def test_weights_equal_duplication(kind):
    rng = np.random.default_rng(3)
    X = rng.standard_normal((60, 3))
    y = (X[:, 0] + 0.5 * rng.standard_normal(60) > 0).astype(int)
    k = rng.integers(1, 4, 60)
    weighted = fit_arrays(kind, None, X, y, k.astype(float))
    duplicated = fit_arrays(kind, None, np.repeat(X, k, axis=0), np.repeat(y, k))
    np.testing.assert_allclose(weighted.params["coef"], duplicated.params["coef"], atol=1e-6)
    assert weighted.params["intercept"] == pytest.approx(duplicated.params["intercept"], abs=1e-6)


def test_logistic_matches_scipy_optimum():
    from scipy.optimize import minimize

    rng = np.random.default_rng(1)
    X = rng.standard_normal((200, 3)) * [1.0, 3.0, 0.2] + [0.0, 5.0, -1.0]
    y = (X @ [1.0, -0.3, 2.0] + rng.standard_normal(200) > -1.5).astype(float)
    w = np.ones(200)
    coef, b = fit_logistic(X, y, w, l2=0.01, iterations=3000)

    mu, sd = X.mean(0), X.std(0)
    Z = (X - mu) / sd

    def obj(theta):
        z = Z @ theta[1:] + theta[0]
        return np.mean(np.logaddexp(0, z) - y * z) + 0.5 * 0.01 * theta[1:] @ theta[1:]

    t = minimize(obj, np.zeros(4), method="L-BFGS-B", options={"gtol": 1e-12, "ftol": 1e-15}).x
    np.testing.assert_allclose(coef, t[1:] / sd, atol=1e-5)
    assert b == pytest.approx(t[0] - mu @ (t[1:] / sd), abs=1e-5)


# ------------------------------------------------------------------ scoring

def test_zero_coefficients_score_half():
    model = TrainedModel(ModelKind.LOGISTIC_REGRESSION, LogisticParams(),
                         {"coef": np.zeros(3), "intercept": 0.0}, 3)
    assert np.all(model.score(np.ones((4, 3))) == 0.5)
    # tie at the threshold goes to the positive class
    assert np.all(model.predict(np.ones((4, 3))) == 1)


def test_forest_of_positive_leaves_scores_one():
    leaf = {"feature": np.array([-1]), "threshold": np.array([0.0]), "left": np.array([-1]),
            "right": np.array([-1]), "value": np.array([1.0])}
    model = TrainedModel(ModelKind.RANDOM_FOREST, ForestParams(3), {"trees": [leaf] * 3}, 2)
    assert np.all(model.score(np.zeros((5, 2))) == 1.0)


def test_threshold_bounds():
    data = two_blobs()
    model = fit("lr", None, data)
    assert np.all(model.predict(data.features, threshold=0.0) == 1)
    with pytest.raises(ValueError):
        model.predict(data.features, threshold=1.5)
    with pytest.raises(ValueError):
        model.predict(data.features, threshold=-0.1)


@pytest.mark.parametrize("kind", KINDS)
def test_predictions_monotone_in_threshold(kind):
    data = two_blobs(sep=1.0, seed=2)
    model = fit(kind, FAST[kind], data)
    prev = None
    for t in np.linspace(0, 1, 11):
        cur = model.predict(data.features, threshold=t)
        if prev is not None:
            assert np.all(cur <= prev)
        prev = cur


def test_dimension_mismatch():
    model = fit("dt", None, two_blobs())
    with pytest.raises(DimensionMismatch):
        model.score(np.zeros((3, 5)))


@pytest.mark.parametrize("kind", KINDS)
def test_json_round_trip(kind):
    data = two_blobs(sep=2.0, seed=4)
    model = fit(kind, FAST[kind], data, seed=7)
    back = TrainedModel.from_json(model.to_json())
    assert back.kind is model.kind and back.hyperparams == model.hyperparams
    np.testing.assert_array_equal(back.score(data.features), model.score(data.features))
    json.loads(model.to_json())


@pytest.mark.parametrize("kind", KINDS)
def test_seeded_determinism(kind):
    data = two_blobs(sep=1.5, seed=6)
    a = fit(kind, FAST[kind], data, seed=11).score(data.features)
    b = fit(kind, FAST[kind], data, seed=11).score(data.features)
    np.testing.assert_array_equal(a, b)


def test_forest_seed_matters():
    data = two_blobs(sep=1.0, seed=6)
    a = fit("rf", FAST[ModelKind.RANDOM_FOREST], data, seed=1).score(data.features)
    b = fit("rf", FAST[ModelKind.RANDOM_FOREST], data, seed=2).score(data.features)
    assert not np.array_equal(a, b)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(KINDS), st.integers(0, 10_000), st.floats(0.0, 3.0))
def test_scores_in_unit_interval(kind, seed, sep):
    data = two_blobs(n=40, sep=sep, seed=seed)
    hp = FAST[kind] if kind is not ModelKind.RANDOM_FOREST else ForestParams(5, 3)
    s = fit(kind, hp, data, seed=seed).score(np.random.default_rng(seed).normal(0, 5, (30, 2)))
    assert np.all((s >= 0.0) & (s <= 1.0))


# --------------------------------------------------------- model selection

def test_fold_sizes_and_stratification():
    data = two_blobs(n=100)
    folds = stratified_folds(data, 5, seed=0)
    assert np.bincount(folds).tolist() == [20] * 5
    for g in (0, 1):
        for y in (0, 1):
            counts = np.bincount(folds[(data.group == g) & (data.outcome == y)], minlength=5)
            assert counts.max() - counts.min() <= 1


def test_folds_deterministic():
    data = two_blobs(n=100)
    np.testing.assert_array_equal(stratified_folds(data, 5, 3), stratified_folds(data, 5, 3))


def test_grid_of_one_is_returned():
    hp = TreeParams(2, 1)
    assert cross_validate("dt", [hp], two_blobs()) == hp


def test_cv_prefers_informative_depth():
    X, y = _xor()
    data = make_dataset(X, y, np.arange(len(y)) % 2, ("A", "B"))
    grid = [TreeParams(0), TreeParams(5)]
    scores = cv_scores("dt", grid, data)
    assert scores[1] > scores[0]
    assert cross_validate("dt", grid, data) == TreeParams(5)


def test_cv_first_entry_wins_ties():
    grid = [TreeParams(3), TreeParams(4)]
    # perfectly separable in one split: both depths score 1.0
    assert cross_validate("dt", grid, two_blobs()) == TreeParams(3)


def test_cv_errors():
    with pytest.raises(EmptyGrid):
        cross_validate("dt", [], two_blobs())
    X = np.arange(12, dtype=float)
    y = np.r_[np.zeros(11, int), 1]
    data = make_dataset(X, y, np.zeros(12, int), ("A",))
    with pytest.raises(FoldClassCollapse):
        cross_validate("dt", [TreeParams(1)], data, k=5)


def test_default_grids_nonempty():
    sizes = {k: len(default_grid(k)) for k in KINDS}
    assert sizes == {ModelKind.DECISION_TREE: 12, ModelKind.RANDOM_FOREST: 12,
                     ModelKind.LOGISTIC_REGRESSION: 4, ModelKind.LINEAR_SVM: 4}
