"""Noiseless benchmark functions in the style of the BBOB testbed.

Only the raw structures are kept (the oscillation and asymmetry
transformations of BBOB are left out), which is enough to exercise
ill-conditioning, rotation and multimodality at desk scale.

Every function is written on ``z``, the transformed variable whose optimum
is at ``z = 0``; Rosenbrock is the one exception and keeps its classical
optimum at ``z = 1``, so an unshifted Rosenbrock is minimal at all-ones.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

TARGET_PRECISION = 1e-8


def random_rotation(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR of a Gaussian, sign-corrected)."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def conditioning(d: int, alpha: float) -> np.ndarray:
    """Diagonal of BBOB's Lambda^alpha."""
    if d == 1:
        return np.ones(1)
    return alpha ** (0.5 * np.arange(d) / (d - 1))


def _ill_cond_weights(d: int, cond: float = 1e6) -> np.ndarray:
    if d == 1:
        return np.ones(1)
    return cond ** (np.arange(d) / (d - 1))


def sphere(z):
    return float(z @ z)


def ellipsoid(z):
    return float(_ill_cond_weights(z.size) @ (z * z))


def rosenbrock(z):
    return float(np.sum(100.0 * (z[:-1] ** 2 - z[1:]) ** 2 + (z[:-1] - 1.0) ** 2))


def discus(z):
    return float(1e6 * z[0] ** 2 + z[1:] @ z[1:])


def cigar(z):
    return float(z[0] ** 2 + 1e6 * (z[1:] @ z[1:]))


def sharp_ridge(z):
    return float(z[0] ** 2 + 100.0 * np.sqrt(z[1:] @ z[1:]))


def different_powers(z):
    d = z.size
    exponents = 2.0 + 4.0 * np.arange(d) / max(d - 1, 1)
    return float(np.sqrt(np.sum(np.abs(z) ** exponents)))


def rastrigin(z):
    return float(10.0 * (z.size - np.sum(np.cos(2 * np.pi * z))) + z @ z)


def ackley(z):
    d = z.size
    value = (
        -20.0 * np.exp(-0.2 * np.sqrt(z @ z / d))
        - np.exp(np.sum(np.cos(2 * np.pi * z)) / d)
        + 20.0
        + np.e
    )
    return float(max(value, 0.0))


def schwefel(z):
    """Schwefel's problem 1.2, sum of squared partial sums."""
    return float(np.sum(np.cumsum(z) ** 2))


@dataclass(frozen=True)
class _Definition:
    base: Callable[[np.ndarray], float]
    rotated: bool
    # Q Lambda^alpha R preconditioning of sharp ridge / attractive sector
    lambda_alpha: float | None = None
    sector: bool = False
    base_optimum: float = 0.0


REGISTRY: dict[str, _Definition] = {
    "sphere": _Definition(sphere, False),
    "ellipsoid": _Definition(ellipsoid, False),
    "rotated_ellipsoid": _Definition(ellipsoid, True),
    "rosenbrock": _Definition(rosenbrock, False, base_optimum=1.0),
    "rotated_rosenbrock": _Definition(rosenbrock, True, base_optimum=1.0),
    "discus": _Definition(discus, True),
    "cigar": _Definition(cigar, True),
    "sharp_ridge": _Definition(sharp_ridge, True, lambda_alpha=10.0),
    "different_powers": _Definition(different_powers, True),
    "attractive_sector": _Definition(sphere, True, lambda_alpha=10.0, sector=True),
    "rastrigin": _Definition(rastrigin, False),
    "rotated_rastrigin": _Definition(rastrigin, True),
    "ackley": _Definition(ackley, False),
    "schwefel": _Definition(schwefel, False),
}


@dataclass(frozen=True, eq=False)
class BenchmarkProblem:
    """A callable benchmark instance with known optimum.

    ``f(x) = base(Q L R (x - x_opt) + base_optimum) + f_opt`` where Q, R are
    orthogonal (identity when unrotated) and L is diagonal.
    """

    name: str
    dimension: int
    rotation: np.ndarray
    x_opt: np.ndarray
    f_opt: float = 0.0
    second_rotation: np.ndarray = field(default=None, repr=False)
    scaling: np.ndarray = field(default=None, repr=False)

    @property
    def target(self) -> float:
        return self.f_opt + TARGET_PRECISION

    def transform(self, x) -> np.ndarray:
        z = self.rotation @ (np.asarray(x, dtype=float) - self.x_opt)
        if self.scaling is not None:
            z = self.second_rotation @ (self.scaling * z)
        return z

    def __call__(self, x) -> float:
        definition = REGISTRY[self.name]
        z = self.transform(x)
        if definition.sector:
            s = np.where(z * self.x_opt > 0, 100.0, 1.0)
            return float(np.sum((s * z) ** 2) ** 0.9) + self.f_opt
        return definition.base(z + definition.base_optimum) + self.f_opt


def make_problem(
    name: str,
    d: int,
    seed: int = 0,
    shift: bool = True,
    rotate: bool | None = None,
) -> BenchmarkProblem:
    """Build a seeded benchmark instance.

    `shift` draws the optimum uniformly in ``[-4, 4]^d``; otherwise the
    optimum sits at the function's canonical point (origin, or all-ones
    for Rosenbrock). `rotate` overrides the per-function default.
    """
    if name not in REGISTRY:
        raise ValueError(f"unknown problem {name!r}; known: {sorted(REGISTRY)}")
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    definition = REGISTRY[name]
    rotate = definition.rotated if rotate is None else rotate
    rng = np.random.default_rng([seed, d, sorted(REGISTRY).index(name)])
    R = random_rotation(d, rng) if rotate else np.eye(d)
    Q = random_rotation(d, rng) if rotate else np.eye(d)
    if shift:
        x_opt = rng.uniform(-4.0, 4.0, d)
    else:
        x_opt = np.full(d, definition.base_optimum)
    if definition.lambda_alpha is not None:
        scaling = conditioning(d, definition.lambda_alpha)
    else:
        scaling, Q = None, None
    return BenchmarkProblem(
        name=name,
        dimension=d,
        rotation=R,
        x_opt=x_opt,
        second_rotation=Q,
        scaling=scaling,
    )
