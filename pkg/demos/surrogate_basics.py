"""Train a ranking surrogate on a rotated ellipsoid and see how well it ranks.

Run with ``python3 demos/surrogate_basics.py``.
"""
import numpy as np

from saacmes import SurrogateHyperParams, WhitenTransform, make_problem, predict, train_ranking_svm
from saacmes.controller import ranking_error

rng = np.random.default_rng(0)
problem = make_problem("rotated_ellipsoid", 5, seed=0)

# sample around a point near the optimum, as a search distribution would
center = problem.x_opt + 0.5
X = center + rng.standard_normal((60, 5))
f = np.array([problem(x) for x in X])
test = center + rng.standard_normal((30, 5))
f_test = np.array([problem(x) for x in test])

hp = SurrogateHyperParams(n_training=60, c_base=6, c_pow=3, c_sigma=1)

# an isotropic kernel first: the ellipsoid's axes are invisible to it
plain = WhitenTransform.from_covariance(np.eye(5), center)
model = train_ranking_svm(X, f, hp, plain)
print("identity metric   test error", round(ranking_error(predict(model, test), f_test), 3))

# CMA-ES learns roughly the inverse Hessian R^T diag(1/w) R on this function
R = problem.rotation
weights = np.logspace(0, 6, 5)
C = R.T @ np.diag(1 / weights) @ R
adapted = WhitenTransform.from_covariance(C, center)
model = train_ranking_svm(X, f, hp, adapted)
print("adapted metric    test error", round(ranking_error(predict(model, test), f_test), 3))

# only the order of f matters: a monotone rescaling trains the same model
again = train_ranking_svm(X, np.log1p(f), hp, adapted)
print("same multipliers after log1p(f):", np.array_equal(model.multipliers, again.multipliers))
print("kernel width", round(model.kernel_width, 3), "train error", model.train_error)
