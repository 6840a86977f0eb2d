import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from saacmes.controller import ranking_error
from saacmes.surrogate import (
    NonViableModel,
    SurrogateHyperParams,
    SurrogateModel,
    WhitenTransform,
    kernel,
    kernel_width,
    pair_gram,
    predict,
    solve_rank_dual,
    train_ranking_svm,
    violation_costs,
    whiten,
)
from saacmes.testbed import random_rotation

IDENTITY2 = WhitenTransform.from_covariance(np.eye(2), np.zeros(2))


def box_qp_oracle(G, costs):
    """Maximize sum(a) - a'Ga/2 on the box by enumerating active sets."""
    n = costs.size
    best = -math.inf
    for status in itertools.product((0, 1, 2), repeat=n):
        a = np.zeros(n)
        free = [i for i in range(n) if status[i] == 2]
        for i in range(n):
            if status[i] == 1:
                a[i] = costs[i]
        if free:
            fixed = [i for i in range(n) if status[i] != 2]
            rhs = 1.0 - G[np.ix_(free, fixed)] @ a[fixed]
            try:
                a[free] = np.linalg.solve(G[np.ix_(free, free)], rhs)
            except np.linalg.LinAlgError:
                continue
        if np.all(a >= -1e-12) and np.all(a <= costs + 1e-12):
            a = np.clip(a, 0, costs)
            best = max(best, a.sum() - 0.5 * a @ G @ a)
    return best


def spd(d, rng):
    A = rng.standard_normal((d, d))
    return A @ A.T + d * np.eye(d)


def test_whiten_examples():
    m = np.array([1.5, -2.0])
    C = spd(2, np.random.default_rng(0))
    np.testing.assert_allclose(whiten(m, WhitenTransform.from_covariance(C, m)), 0, atol=1e-15)
    np.testing.assert_array_equal(whiten([3, 4], IDENTITY2), [3, 4])
    t = WhitenTransform.from_covariance(np.diag([4.0, 1.0]), np.zeros(2))
    np.testing.assert_allclose(whiten([2, 2], t), [1, 2])


def test_whiten_dimension_mismatch():
    with pytest.raises(ValueError):
        whiten([1, 2, 3], IDENTITY2)


def test_whiten_transform_squares_to_inverse():
    C = spd(5, np.random.default_rng(1))
    t = WhitenTransform.from_covariance(C, np.zeros(5))
    np.testing.assert_allclose(t.inv_sqrt_C, t.inv_sqrt_C.T)
    np.testing.assert_allclose(t.inv_sqrt_C @ t.inv_sqrt_C @ C, np.eye(5), atol=1e-10)


def test_kernel_examples():
    assert kernel([1, 2], [1, 2], 0.3) == 1.0
    assert kernel([0, 0], [1, 0], 1.0) == pytest.approx(math.exp(-0.5), abs=1e-12)
    values = [kernel([0, 0], [r, 0], 1.0) for r in (0.5, 1, 2, 5, 40)]
    assert np.all(np.diff(values) < 0) and values[-1] < 1e-300


@pytest.mark.parametrize("width", [0.0, -1.0])
def test_kernel_rejects_width(width):
    with pytest.raises(ValueError):
        kernel([0], [1], width)


def test_kernel_width_examples():
    assert kernel_width([[0, 0], [0, 2]], 1.0) == 2.0
    assert kernel_width([[0, 0], [1, 0], [2, 0]], 1.0) == pytest.approx(4 / 3)
    assert kernel_width([[1, 1]] * 4, 1.0) == 1.0
    with pytest.raises(ValueError):
        kernel_width([[0, 0]], 1.0)


def test_violation_cost_examples():
    c = violation_costs(5, 6, 3)
    assert c[0] == pytest.approx(6.4e7)
    assert c[3] == pytest.approx(1e6)
    assert np.all(np.diff(c) < 0)
    np.testing.assert_array_equal(violation_costs(6, 2, 0), np.full(5, 100.0))


def _linear_instance(rng):
    n_points = int(rng.integers(2, 5))
    Z = rng.standard_normal((n_points, 4))
    G = pair_gram(Z @ Z.T)
    costs = rng.uniform(0.05, 3.0, n_points - 1)
    return G, costs


def test_dual_matches_box_qp_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(30):
        G, costs = _linear_instance(rng)
        sol = solve_rank_dual(G, costs)
        assert abs(sol.objective - box_qp_oracle(G, costs)) <= 1e-6


def test_dual_two_points_closed_form():
    X = np.array([[0.0, 0.0], [1.0, 0.5]])
    hp = SurrogateHyperParams(2, 6, 3, 1.0)
    model = train_ranking_svm(X, [1.0, 2.0], hp, IDENTITY2)
    K = np.exp(-np.sum((X[0] - X[1]) ** 2) / (2 * model.kernel_width**2))
    g11 = 2 - 2 * K
    assert model.multipliers[0] == pytest.approx(min(model.violation_costs[0], 1 / g11), rel=1e-12)


def test_one_dimensional_ordering_examples():
    X = np.arange(1.0, 6.0)[:, None]
    t = WhitenTransform.from_covariance(np.eye(1), np.zeros(1))
    model = train_ranking_svm(X, X[:, 0], SurrogateHyperParams(5, 6, 3, 1), t)
    assert model.train_error == 0
    scores = predict(model, X)
    assert np.all(np.diff(scores) < 0)
    assert predict(model, [1.0]) > predict(model, [5.0])


def test_monotone_data_n20_zero_error():
    t = WhitenTransform.from_covariance(np.eye(1), np.zeros(1))
    X = np.random.default_rng(3).permutation(np.linspace(-3, 5, 20))[:, None]
    f = X[:, 0] ** 3
    model = train_ranking_svm(X, f, SurrogateHyperParams(20, 6, 3, 1), t)
    assert ranking_error(predict(model, X), f) == 0


def test_duplicate_points_non_viable():
    X = np.ones((6, 2))
    with pytest.raises(NonViableModel):
        train_ranking_svm(X, np.arange(6.0), SurrogateHyperParams(6, 6, 3, 1), IDENTITY2)


def test_too_few_points_non_viable():
    with pytest.raises(NonViableModel):
        train_ranking_svm(np.zeros((1, 2)), [0.0], SurrogateHyperParams(2, 6, 3, 1), IDENTITY2)


def test_zero_multipliers_predict_zero():
    X = np.random.default_rng(4).standard_normal((5, 2))
    model = SurrogateModel(
        transform=IDENTITY2,
        training_points=X,
        whitened_points=X,
        multipliers=np.zeros(4),
        kernel_width=1.0,
        violation_costs=np.ones(4),
        train_error=1.0,
    )
    assert predict(model, [0.3, -2.0]) == 0.0
    np.testing.assert_array_equal(predict(model, X), 0.0)


def test_predict_dimension_mismatch():
    X = np.random.default_rng(5).standard_normal((5, 2))
    model = train_ranking_svm(X, X[:, 0], SurrogateHyperParams(5, 6, 3, 1), IDENTITY2)
    with pytest.raises(ValueError):
        predict(model, [1.0, 2.0, 3.0])


def test_margins_on_converged_instance():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((8, 2))
    f = np.sum(X**2, axis=1)
    hp = SurrogateHyperParams(8, 1, 1, 1)
    model = train_ranking_svm(X, f, hp, IDENTITY2, max_updates=10**6)
    scores = predict(model, model.training_points)
    gaps = scores[:-1] - scores[1:]
    inside = model.multipliers < model.violation_costs
    # at the optimum an unsaturated constraint has slack zero
    assert np.all(gaps[inside] >= 1 - 1e-6)


def _random_training_set(seed, n=30, d=3):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d)) * [1.0, 3.0, 0.2]
    f = X @ np.array([1.0, -2.0, 0.5]) + 0.3 * np.sum(X**2, axis=1)
    return X, f


@given(seed=st.integers(0, 10**6))
@settings(max_examples=20, deadline=None)
def test_monotone_invariance_bit_identical(seed):
    X, f = _random_training_set(seed)
    t = WhitenTransform.from_covariance(np.diag([1.0, 9.0, 0.04]), np.zeros(3))
    hp = SurrogateHyperParams(30, 6, 3, 1)
    a = train_ranking_svm(X, f, hp, t)
    b = train_ranking_svm(X, np.exp(f / 10) - 5, hp, t)
    np.testing.assert_array_equal(a.multipliers, b.multipliers)
    np.testing.assert_array_equal(a.training_points, b.training_points)
    assert a.kernel_width == b.kernel_width


@given(seed=st.integers(0, 10**6))
@settings(max_examples=15, deadline=None)
def test_rotation_equivariance(seed):
    rng = np.random.default_rng(seed)
    X, f = _random_training_set(seed)
    C = spd(3, rng)
    m = rng.standard_normal(3)
    R = random_rotation(3, rng)
    hp = SurrogateHyperParams(30, 6, 3, 1)
    model = train_ranking_svm(X, f, hp, WhitenTransform.from_covariance(C, m))
    rotated = train_ranking_svm(
        X @ R, f, hp, WhitenTransform.from_covariance(R.T @ C @ R, R.T @ m)
    )
    probe = rng.standard_normal((10, 3)) * 2
    expected = predict(model, probe)
    got = predict(rotated, probe @ R)
    np.testing.assert_allclose(got, expected, rtol=1e-6, atol=1e-6 * np.abs(expected).max())


@given(seed=st.integers(0, 10**6), c_base=st.floats(0, 10), c_pow=st.floats(0, 6))
@settings(max_examples=25, deadline=None)
def test_dual_feasibility(seed, c_base, c_pow):
    X, f = _random_training_set(seed, n=25)
    model = train_ranking_svm(X, f, SurrogateHyperParams(25, c_base, c_pow, 1.0),
                              WhitenTransform.from_covariance(np.eye(3), np.zeros(3)))
    assert np.all(model.multipliers >= 0)
    assert np.all(model.multipliers <= model.violation_costs)
    assert model.kernel_width > 0
    assert 0 <= model.train_error <= 1


@given(seed=st.integers(0, 10**6))
@settings(max_examples=15, deadline=None)
def test_dual_objective_non_decreasing_per_sweep(seed):
    X, f = _random_training_set(seed, n=40)
    Z = X / X.std(axis=0)
    Z = Z[np.argsort(f, kind="stable")]
    width = kernel_width(Z, 1.0)
    K = np.exp(-np.sum((Z[:, None] - Z[None]) ** 2, axis=-1) / (2 * width**2))
    sol = solve_rank_dual(pair_gram(K), violation_costs(40, 6, 3), trace=True)
    obj = sol.objectives
    assert obj.size > 1
    assert np.all(np.diff(obj) >= -1e-9 * np.abs(obj[1:]))


def test_solver_respects_update_cap():
    X, f = _random_training_set(7, n=50)
    t = WhitenTransform.from_covariance(np.eye(3), np.zeros(3))
    model = train_ranking_svm(X, f, SurrogateHyperParams(50, 6, 3, 1), t)
    assert model.updates <= 1000 * 50


def test_hyperparams_validation():
    with pytest.raises(ValueError):
        SurrogateHyperParams(1, 6, 3, 1)
    with pytest.raises(ValueError):
        SurrogateHyperParams(10, 6, 3, 0)
