"""(mu/mu_w, lambda)-CMA-ES generation engine and IPOP restart test.

The engine is split into a state container (`OptimizerState`) and a
single-generation step (`gen_cma`) so that a caller can alternate the
objective it optimizes from one generation to the next while the
distribution parameters keep evolving. This is what the surrogate
controller needs: the same state is driven by the true objective in some
generations and by a learned surrogate in others.

Strategy parameters follow the published CMA-ES defaults (Hansen's
tutorial); nothing here is specific to surrogate assistance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


@dataclass
class OptimizerState:
    """Dynamic and static variables of one CMA-ES instance.

    `gen_cma` mutates the instance in place. Use `copy()` for an
    independent snapshot (the random generator is copied too).
    """

    dimension: int
    mean: np.ndarray
    sigma: float
    C: np.ndarray
    B: np.ndarray
    D: np.ndarray
    path_sigma: np.ndarray
    path_c: np.ndarray
    popsize: int
    mu: int
    weights: np.ndarray
    mueff: float
    cc: float
    cs: float
    c1: float
    cmu: float
    damps: float
    chi_n: float
    eigen_gap: int
    rng: np.random.Generator
    active: bool = False
    generation: int = 0
    evaluations: int = 0
    last_eigen_update: int = 0

    @property
    def condition_number(self) -> float:
        return float((self.D.max() / self.D.min()) ** 2)

    @property
    def inv_sqrt_C(self) -> np.ndarray:
        return (self.B / self.D) @ self.B.T

    def copy(self) -> "OptimizerState":
        rng = np.random.Generator(type(self.rng.bit_generator)())
        rng.bit_generator.state = self.rng.bit_generator.state
        arrays = {
            name: getattr(self, name).copy()
            for name in ("mean", "C", "B", "D", "path_sigma", "path_c", "weights")
        }
        return OptimizerState(
            **{**self.__dict__, **arrays, "rng": rng}
        )


@dataclass
class Generation:
    """Offspring of one `gen_cma` call.

    ``ranking[k]`` is the index (into `candidates`) of the k-th best
    candidate; ties keep candidate order.
    """

    candidates: np.ndarray
    fitnesses: np.ndarray
    ranking: np.ndarray

    @property
    def best_fitness(self) -> float:
        return float(self.fitnesses[self.ranking[0]])


@dataclass
class RestartPolicy:
    stop_tolfun: float = 1e-12
    stop_tolx: float = 1e-12
    max_condition: float = 1e14
    max_evaluations: int = 10**9
    restarts_done: int = 0
    population_multiplier: int = 1

    def register_restart(self) -> None:
        self.restarts_done += 1
        self.population_multiplier *= 2


def default_popsize(d: int) -> int:
    return 4 + int(math.floor(3 * math.log(d)))


def init_cma(
    d: int,
    initial_mean: Sequence[float],
    initial_sigma: float,
    popsize: Optional[int] = None,
    seed=None,
    active: bool = False,
) -> OptimizerState:
    """Create a fresh CMA-ES state with C = I and zero evolution paths.

    Parameters
    ----------
    d : int
        Search space dimension.
    initial_mean : array_like
        Starting point, length ``d``.
    initial_sigma : float
        Initial step size.
    popsize : int, optional
        Offspring number; defaults to ``4 + floor(3 ln d)``.
    seed : int, SeedSequence or Generator, optional
        Source of randomness. A Generator is used as is (not copied).
    active : bool
        Reserved hook for the active covariance update; must stay False.
    """
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    if not initial_sigma > 0 or not math.isfinite(initial_sigma):
        raise ValueError(f"initial_sigma must be positive, got {initial_sigma!r}")
    mean = np.array(initial_mean, dtype=float).reshape(-1)
    if mean.shape != (d,):
        raise ValueError(f"initial_mean has length {mean.size}, expected {d}")
    if popsize is None:
        lam = default_popsize(d)
    else:
        lam = int(popsize)
        if lam < 4:
            raise ValueError(f"popsize must be at least 4, got {popsize!r}")
    if active:
        raise NotImplementedError("active covariance update is not implemented")

    mu = lam // 2
    raw = math.log((lam + 1) / 2) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mueff = 1.0 / float(np.sum(weights**2))

    cc = (4 + mueff / d) / (d + 4 + 2 * mueff / d)
    cs = (mueff + 2) / (d + mueff + 5)
    c1 = 2 / ((d + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((d + 2) ** 2 + mueff))
    damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (d + 1)) - 1) + cs
    chi_n = math.sqrt(d) * (1 - 1 / (4 * d) + 1 / (21 * d**2))
    eigen_gap = max(1, int(1 / (10 * d * (c1 + cmu))))

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return OptimizerState(
        dimension=d,
        mean=mean,
        sigma=float(initial_sigma),
        C=np.eye(d),
        B=np.eye(d),
        D=np.ones(d),
        path_sigma=np.zeros(d),
        path_c=np.zeros(d),
        popsize=lam,
        mu=mu,
        weights=weights,
        mueff=mueff,
        cc=cc,
        cs=cs,
        c1=c1,
        cmu=cmu,
        damps=damps,
        chi_n=chi_n,
        eigen_gap=eigen_gap,
        rng=rng,
        active=active,
    )


def rank_fitnesses(fitnesses: np.ndarray) -> np.ndarray:
    """Ascending stable ordering with non-finite values ranked last."""
    f = np.asarray(fitnesses, dtype=float)
    keyed = np.where(np.isfinite(f), f, np.inf)
    return np.argsort(keyed, kind="stable")


def sample(state: OptimizerState) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``popsize`` candidates; returns (candidates, steps y = B D z)."""
    z = state.rng.standard_normal((state.popsize, state.dimension))
    y = (z * state.D) @ state.B.T
    return state.mean + state.sigma * y, y


def update(state: OptimizerState, y: np.ndarray, ranking: np.ndarray) -> None:
    """Recombination, cumulation, covariance and step-size update in place."""
    d = state.dimension
    y_sel = y[ranking[: state.mu]]
    y_w = state.weights @ y_sel
    state.mean = state.mean + state.sigma * y_w
    state.generation += 1

    c_inv_sqrt_y = state.B @ ((state.B.T @ y_w) / state.D)
    state.path_sigma = (1 - state.cs) * state.path_sigma + math.sqrt(
        state.cs * (2 - state.cs) * state.mueff
    ) * c_inv_sqrt_y
    ps_norm = float(np.linalg.norm(state.path_sigma))
    hsig = ps_norm / math.sqrt(
        1 - (1 - state.cs) ** (2 * state.generation)
    ) < (1.4 + 2 / (d + 1)) * state.chi_n
    state.path_c = (1 - state.cc) * state.path_c + hsig * math.sqrt(
        state.cc * (2 - state.cc) * state.mueff
    ) * y_w

    delta_h = (1 - hsig) * state.cc * (2 - state.cc)
    rank_one = np.outer(state.path_c, state.path_c) + delta_h * state.C
    rank_mu = (y_sel.T * state.weights) @ y_sel
    state.C = (
        (1 - state.c1 - state.cmu) * state.C
        + state.c1 * rank_one
        + state.cmu * rank_mu
    )
    state.C = (state.C + state.C.T) / 2

    state.sigma *= math.exp(
        min(1.0, (state.cs / state.damps) * (ps_norm / state.chi_n - 1))
    )

    if state.generation - state.last_eigen_update >= state.eigen_gap:
        refresh_eigensystem(state)


def refresh_eigensystem(state: OptimizerState) -> None:
    eigvals, B = np.linalg.eigh(state.C)
    # guard against round-off pushing tiny eigenvalues negative
    floor = max(eigvals.max(), 1e-300) * 1e-20
    if eigvals.min() < floor:
        eigvals = np.maximum(eigvals, floor)
        state.C = (B * eigvals) @ B.T
    state.B = B
    state.D = np.sqrt(eigvals)
    state.last_eigen_update = state.generation


def gen_cma(
    state: OptimizerState,
    objective: Callable[[np.ndarray], float],
    vectorized: bool = False,
) -> tuple[OptimizerState, Generation]:
    """Run one CMA-ES generation of ``objective`` on ``state``.

    The state is updated in place and returned together with the
    evaluated offspring. With `vectorized`, ``objective`` receives all
    candidates as rows and returns one value per row. Non-finite objective
    values are ranked worst; if every value is non-finite a
    `FloatingPointError` is raised and the state is left untouched apart
    from the consumed random numbers.
    """
    candidates, y = sample(state)
    if vectorized:
        fitnesses = np.asarray(objective(candidates), dtype=float).reshape(state.popsize)
    else:
        fitnesses = np.array([objective(x) for x in candidates], dtype=float)
    if not np.isfinite(fitnesses).any():
        raise FloatingPointError("objective returned no finite value in this generation")
    ranking = rank_fitnesses(fitnesses)
    state.evaluations += state.popsize
    update(state, y, ranking)
    return state, Generation(candidates, fitnesses, ranking)


def restart_window(state: OptimizerState) -> int:
    return 10 + int(math.ceil(30 * state.dimension / state.popsize))


def should_restart(
    state: OptimizerState, policy: RestartPolicy, recent_best: Sequence[float]
) -> bool:
    """IPOP trigger: stagnating best values, collapsed step, or bad conditioning."""
    if not (np.isfinite(state.sigma) and np.isfinite(state.C).all()):
        return True
    window = restart_window(state)
    if len(recent_best) >= window:
        tail = np.asarray(recent_best[-window:], dtype=float)
        if np.ptp(tail) < policy.stop_tolfun:
            return True
    if state.sigma * float(state.D.max()) < policy.stop_tolx:
        return True
    if state.condition_number > policy.max_condition:
        return True
    return False
