"""Comparison-based surrogate: Ranking SVM with a covariance-adapted RBF kernel.

Training points are mapped to ``C^{-1/2} (x - m)`` using the search
distribution of the optimizer, so that an ordinary Gaussian kernel on the
image is a Mahalanobis kernel in the original space. The dual of the
ranking problem over consecutive pairs is solved by cyclic coordinate
ascent with box clipping.

Prediction convention: larger values are better. Point ranked first by the
true objective (the smallest f) receives the largest score.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from numba import njit
from scipy.spatial.distance import cdist, pdist

#: coordinates whose curvature is below this are never updated
DEGENERATE_CURVATURE = 1e-12
KKT_TOL = 1e-8


class NonViableModel(RuntimeError):
    """Raised when a surrogate cannot be trained from the given data."""


@dataclass(frozen=True)
class SurrogateHyperParams:
    n_training: int
    c_base: float
    c_pow: float
    c_sigma: float

    def __post_init__(self):
        if self.n_training < 2:
            raise ValueError(f"n_training must be >= 2, got {self.n_training}")
        if self.c_sigma <= 0:
            raise ValueError(f"c_sigma must be positive, got {self.c_sigma}")


@dataclass(frozen=True)
class WhitenTransform:
    inv_sqrt_C: np.ndarray
    center: np.ndarray

    @classmethod
    def from_covariance(cls, C, mean) -> "WhitenTransform":
        C = np.asarray(C, dtype=float)
        eigvals, B = np.linalg.eigh((C + C.T) / 2)
        if eigvals.min() <= 0:
            raise ValueError("covariance matrix is not positive definite")
        return cls((B / np.sqrt(eigvals)) @ B.T, np.array(mean, dtype=float))

    @classmethod
    def from_state(cls, state) -> "WhitenTransform":
        """Snapshot of an `OptimizerState` (uses its cached eigensystem)."""
        return cls(state.inv_sqrt_C.copy(), state.mean.copy())

    @property
    def dimension(self) -> int:
        return self.center.size


def whiten(x, transform: WhitenTransform) -> np.ndarray:
    """Apply ``x -> C^{-1/2} (x - m)``; accepts one vector or rows of vectors."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != transform.dimension:
        raise ValueError(
            f"dimension mismatch: got {x.shape[-1]}, transform has {transform.dimension}"
        )
    return (x - transform.center) @ transform.inv_sqrt_C.T


def kernel(u, v, width: float) -> float:
    """Gaussian RBF ``exp(-|u - v|^2 / (2 width^2))``."""
    if not width > 0:
        raise ValueError(f"kernel width must be positive, got {width!r}")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")
    diff = u - v
    return float(np.exp(-(diff @ diff) / (2 * width**2)))


def rbf_gram(A: np.ndarray, B: np.ndarray, width: float) -> np.ndarray:
    sq = cdist(A, B, "sqeuclidean")
    return np.exp(-sq / (2 * width**2))


def kernel_width(points, c_sigma: float) -> float:
    """``c_sigma`` times the mean pairwise distance of ``points``.

    Falls back to 1 when every point coincides.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] < 2:
        raise ValueError("kernel_width needs at least 2 points")
    dispersion = float(pdist(points).mean())
    if dispersion == 0.0:
        return 1.0
    return c_sigma * dispersion


def violation_costs(n: int, c_base: float, c_pow: float) -> np.ndarray:
    """Costs ``10**c_base * (n - i)**c_pow`` for constraints i = 1..n-1."""
    if n < 2:
        raise ValueError(f"need at least 2 points, got {n}")
    i = np.arange(1, n)
    return 10.0**c_base * (n - i).astype(float) ** c_pow


def pair_gram(K: np.ndarray) -> np.ndarray:
    """Gram matrix of the consecutive differences ``phi(x_i) - phi(x_{i+1})``."""
    return K[:-1, :-1] - K[:-1, 1:] - K[1:, :-1] + K[1:, 1:]


@njit(cache=True, fastmath=True)
def _coordinate_ascent(G, costs, alpha, grad, max_updates, tol, objectives):
    n = costs.shape[0]
    updates = 0
    sweeps = 0
    while updates < max_updates:
        for i in range(n):
            if updates >= max_updates:
                break
            updates += 1
            gii = G[i, i]
            if gii <= 1e-12:
                continue
            new = alpha[i] + grad[i] / gii
            if new < 0.0:
                new = 0.0
            elif new > costs[i]:
                new = costs[i]
            delta = new - alpha[i]
            if delta != 0.0:
                alpha[i] = new
                for j in range(n):
                    grad[j] -= delta * G[i, j]
        if sweeps < objectives.shape[0]:
            s = 0.0
            for i in range(n):
                s += alpha[i] * (1.0 + grad[i])
            objectives[sweeps] = 0.5 * s
        sweeps += 1

        worst = 0.0
        for i in range(n):
            if G[i, i] <= 1e-12:
                continue
            g = grad[i]
            if alpha[i] <= 0.0:
                v = g if g > 0.0 else 0.0
            elif alpha[i] >= costs[i]:
                v = -g if g < 0.0 else 0.0
            else:
                v = abs(g)
            if v > worst:
                worst = v
        if worst <= tol:
            break
    return updates, sweeps


@dataclass
class DualSolution:
    alpha: np.ndarray
    gradient: np.ndarray
    updates: int
    sweeps: int
    objectives: np.ndarray = field(repr=False)

    @property
    def objective(self) -> float:
        return dual_objective(self.alpha, self.gradient)


def dual_objective(alpha: np.ndarray, gradient: np.ndarray) -> float:
    # sum(a) - a'Ga/2 with Ga = 1 - gradient
    return 0.5 * float(alpha @ (1.0 + gradient))


def solve_rank_dual(
    G: np.ndarray,
    costs: np.ndarray,
    max_updates: Optional[int] = None,
    tol: float = KKT_TOL,
    trace: bool = False,
) -> DualSolution:
    """Maximize ``sum(a) - a'Ga/2`` subject to ``0 <= a <= costs``.

    Cyclic coordinate ascent with the exact one-dimensional optimum
    clipped to the box. The gradient of the linear term is 1, so ``tol``
    on the projected gradient is relative to the initial gradient.
    `max_updates` counts visited coordinates and defaults to
    ``1000 * (len(costs) + 1)``.
    """
    G = np.ascontiguousarray(G, dtype=float)
    costs = np.ascontiguousarray(costs, dtype=float)
    n = costs.size
    if G.shape != (n, n):
        raise ValueError(f"G has shape {G.shape}, expected {(n, n)}")
    if max_updates is None:
        max_updates = 1000 * (n + 1)
    alpha = np.zeros(n)
    grad = np.ones(n)
    objectives = np.empty(max_updates // max(n, 1) + 2 if trace else 0)
    updates, sweeps = _coordinate_ascent(
        G, costs, alpha, grad, int(max_updates), float(tol), objectives
    )
    return DualSolution(alpha, grad, updates, sweeps, objectives[: min(sweeps, objectives.size)])


@dataclass(frozen=True)
class SurrogateModel:
    """Trained ranking surrogate; immutable once built."""

    transform: WhitenTransform
    training_points: np.ndarray
    whitened_points: np.ndarray
    multipliers: np.ndarray
    kernel_width: float
    violation_costs: np.ndarray
    train_error: float
    updates: int = 0

    @cached_property
    def coefficients(self) -> np.ndarray:
        """Per-point expansion weights: ``f(x) = sum_j coef_j K(x_j, x)``."""
        a = self.multipliers
        coef = np.zeros(a.size + 1)
        coef[:-1] += a
        coef[1:] -= a
        return coef

    def predict(self, x) -> np.ndarray | float:
        return predict(self, x)


def predict(model: SurrogateModel, x):
    """Surrogate score(s) of ``x``; larger means better ranked."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    z = whiten(np.atleast_2d(x), model.transform)
    values = rbf_gram(z, model.whitened_points, model.kernel_width) @ model.coefficients
    return float(values[0]) if single else values


def train_ranking_svm(
    points,
    f_values,
    hp: SurrogateHyperParams,
    transform: WhitenTransform,
    max_updates: Optional[int] = None,
) -> SurrogateModel:
    """Fit the ranking surrogate on ``points`` with objective ``f_values``.

    Points are ranked by ascending objective (stable on ties), whitened
    with ``transform`` and used as-is: selecting the most recent
    ``hp.n_training`` archive points is the caller's job. Raises
    `NonViableModel` when the kernel cannot be evaluated or no constraint
    is trainable.
    """
    X = np.asarray(points, dtype=float)
    f = np.asarray(f_values, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise NonViableModel("need at least two training points")
    if f.shape != (X.shape[0],):
        raise ValueError("f_values must have one entry per point")
    order = np.argsort(f, kind="stable")
    X = X[order]
    n = X.shape[0]

    Z = whiten(X, transform)
    if not np.isfinite(Z).all():
        raise NonViableModel("whitened training points are not finite")
    width = kernel_width(Z, hp.c_sigma)
    costs = violation_costs(n, hp.c_base, hp.c_pow)
    with np.errstate(all="ignore"):
        K = rbf_gram(Z, Z, width)
        G = pair_gram(K)
    if not (np.isfinite(G).all() and np.isfinite(costs).all()):
        raise NonViableModel("kernel matrix has non-finite entries")
    if np.diag(G).max() <= DEGENERATE_CURVATURE:
        raise NonViableModel("all consecutive training points coincide")

    if max_updates is None:
        max_updates = 1000 * n
    sol = solve_rank_dual(G, costs, max_updates=max_updates)
    margins = 1.0 - sol.gradient
    return SurrogateModel(
        transform=transform,
        training_points=X,
        whitened_points=Z,
        multipliers=sol.alpha,
        kernel_width=width,
        violation_costs=costs,
        train_error=float(np.mean(margins <= 0.0)),
        updates=sol.updates,
    )
