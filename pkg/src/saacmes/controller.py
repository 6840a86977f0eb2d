"""Self-adaptive surrogate-assisted IPOP-CMA-ES.

The run alternates three phases after a short warm-up on the true
objective:

1. train a ranking surrogate on the most recent archive points,
2. let CMA-ES optimize the surrogate for ``lifelength`` generations,
3. spend one generation on the true objective, measure how well the
   surrogate ranked those fresh points, and derive the next lifelength
   from the smoothed error.

In parallel a small embedded CMA-ES searches the surrogate
hyper-parameters; its fitness is the ranking error a candidate setting
would have achieved on the newest batch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Protocol

import numpy as np

from .cma import (
    OptimizerState,
    RestartPolicy,
    gen_cma,
    init_cma,
    default_popsize,
    rank_fitnesses,
    should_restart,
)
from .surrogate import (
    NonViableModel,
    SurrogateHyperParams,
    WhitenTransform,
    train_ranking_svm,
)

#: fitness given to hyper-parameter settings that cannot train a model
NON_VIABLE_PENALTY = 2.0


def legacy_n_training(d: int) -> int:
    """Training-set size rule of the predecessor ACM-ES, ``floor(70 sqrt(d))``."""
    return int(math.floor(70 * math.sqrt(d)))


def default_n_training(d: int) -> int:
    return int(math.floor(40 + 4 * d**1.7))


def default_hyperparams(d: int) -> SurrogateHyperParams:
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    return SurrogateHyperParams(default_n_training(d), 6.0, 3.0, 1.0)


def hyperparam_bounds(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper bounds of (n_training, c_base, c_pow, c_sigma)."""
    lower = np.array([4.0 * d, 0.0, 0.0, 0.5])
    upper = np.array([2.0 * default_n_training(d), 10.0, 6.0, 2.0])
    return lower, upper


def encode_hyperparams(hp: SurrogateHyperParams, d: int) -> np.ndarray:
    lower, upper = hyperparam_bounds(d)
    values = np.array([hp.n_training, hp.c_base, hp.c_pow, hp.c_sigma], dtype=float)
    return (values - lower) / (upper - lower)


def decode_hyperparams(u, d: int) -> SurrogateHyperParams:
    """Map a point of the unit cube (clamped first) to hyper-parameters."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    lower, upper = hyperparam_bounds(d)
    v = lower + u * (upper - lower)
    n = int(np.clip(round(v[0]), lower[0], upper[0]))
    return SurrogateHyperParams(max(n, 2), float(v[1]), float(v[2]), float(v[3]))


class Scorer(Protocol):
    def predict(self, x): ...


def ranking_error(scores, f_values) -> float:
    """Fraction of pairs ordered wrongly by ``scores`` (larger = better).

    Pairs are taken in ascending order of ``f_values`` (stable); a pair
    (i, j) with i ranked before j is violated when ``score_i <= score_j``.
    """
    f = np.asarray(f_values, dtype=float)
    s = np.asarray(scores, dtype=float)
    n = f.size
    if n < 2:
        raise ValueError("ranking error needs at least two points")
    s = s[rank_fitnesses(f)]
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    violated = (s[:, None] <= s[None, :]) & upper
    return 2.0 * violated.sum() / (n * (n - 1))


def measure_surrogate_error(model: Scorer, test_points, test_f) -> float:
    test_points = np.asarray(test_points, dtype=float)
    if test_points.shape[0] < 2:
        raise ValueError("test set needs at least two points")
    return ranking_error(model.predict(test_points), test_f)


def relax_error(err: float, fresh_err: float, beta: float = 0.2) -> float:
    return (1.0 - beta) * err + beta * fresh_err


def adjust_lifelength(err: float, threshold: float = 0.45, max_lifelength: int = 20) -> int:
    """Lifelength decreasing linearly from ``max_lifelength`` at Err=0 to 0 at the threshold."""
    if threshold <= 0:
        return 0
    n = math.floor((threshold - err) / threshold * max_lifelength)
    return int(min(max(n, 0), max_lifelength))


class Archive:
    """Append-only record of every truly evaluated point.

    A snapshot is just a size: the first ``size`` entries never change.
    """

    def __init__(self, dimension: int, capacity: int = 1024):
        self.dimension = dimension
        self._X = np.empty((capacity, dimension))
        self._f = np.empty(capacity)
        self._g = np.empty(capacity, dtype=np.int64)
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def append(self, points, f_values, generation: int) -> None:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        k = points.shape[0]
        if self._size + k > self._X.shape[0]:
            cap = max(2 * self._X.shape[0], self._size + k)
            self._X = np.resize(self._X, (cap, self.dimension))
            self._f = np.resize(self._f, cap)
            self._g = np.resize(self._g, cap)
        if self._size and generation < self._g[self._size - 1]:
            raise ValueError("archive generations must be non-decreasing")
        sl = slice(self._size, self._size + k)
        self._X[sl] = points
        self._f[sl] = f_values
        self._g[sl] = generation
        self._size += k

    @property
    def points(self) -> np.ndarray:
        return self._X[: self._size]

    @property
    def f_values(self) -> np.ndarray:
        return self._f[: self._size]

    @property
    def generations(self) -> np.ndarray:
        return self._g[: self._size]

    def recent(self, n: int, size: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
        """The last ``n`` entries of the snapshot holding ``size`` entries."""
        end = self._size if size is None else size
        start = max(0, end - n)
        return self._X[start:end], self._f[start:end]


SurrogateFactory = Callable[
    [np.ndarray, np.ndarray, SurrogateHyperParams, WhitenTransform], Scorer
]


def build_surrogate(X, f, hp: SurrogateHyperParams, transform: WhitenTransform):
    return train_ranking_svm(X, f, hp, transform)


def hyperparam_objective(
    candidate,
    archive: Archive,
    snapshot_size: int,
    transform: WhitenTransform,
    test_points,
    test_f,
    factory: SurrogateFactory = build_surrogate,
) -> float:
    """Ranking error on the newest batch of a model trained with ``candidate``.

    The model sees only the archive snapshot of ``snapshot_size`` entries
    (taken when the current surrogate was built) and the search
    distribution ``transform`` of that moment. Non-viable settings score
    `NON_VIABLE_PENALTY`.
    """
    if snapshot_size < 1 or len(test_f) < 2:
        raise ValueError("need a non-empty snapshot and at least two test points")
    hp = decode_hyperparams(candidate, archive.dimension)
    X, f = archive.recent(hp.n_training, snapshot_size)
    try:
        model = factory(X, f, hp, transform)
    except NonViableModel:
        return NON_VIABLE_PENALTY
    return measure_surrogate_error(model, test_points, test_f)


@dataclass
class ControllerConfig:
    g_start: int = 10
    max_lifelength: int = 20
    error_threshold: float = 0.45
    error_relaxation: float = 0.2
    initial_error: float = 0.5
    use_surrogate: bool = True
    adapt_hyperparams: bool = True
    #: pins the lifelength; the error is still measured and traced
    fixed_lifelength: Optional[int] = None
    #: fixed surrogate hyper-parameters (defaults to `default_hyperparams`)
    hyperparams: Optional[SurrogateHyperParams] = None
    hyper_popsize: int = 20
    hyper_sigma: float = 0.3
    initial_sigma: float = 2.0
    init_lower: float = -4.0
    init_upper: float = 4.0
    popsize: Optional[int] = None
    gamma: int = 1
    restarts: bool = True
    stop_tolfun: float = 1e-12
    stop_tolx: float = 1e-12
    max_condition: float = 1e14
    record_candidates: bool = False
    surrogate_factory: SurrogateFactory = build_surrogate


@dataclass
class ControllerState:
    err: float
    lifelength: int
    alpha: SurrogateHyperParams
    hyper_state: OptimizerState
    generation: int = 0
    g_prev: int = 0


@dataclass
class TraceRow:
    generation: int
    evaluations: int
    kind: str
    best_f: float
    err: float
    measured_err: float
    lifelength: int
    alpha: SurrogateHyperParams
    popsize: int
    sigma: float
    restarts: int


@dataclass
class RunRecord:
    seed: int
    success: bool = False
    evaluations: int = 0
    best_f: float = math.inf
    best_x: Optional[np.ndarray] = None
    restarts: int = 0
    f_opt: float = 0.0
    trace: list = field(default_factory=list)
    candidates: list = field(default_factory=list)

    @property
    def true_rows(self) -> list:
        return [r for r in self.trace if r.kind == "true"]


def init_hyper_state(d: int, config: ControllerConfig, rng: np.random.Generator) -> OptimizerState:
    start = encode_hyperparams(default_hyperparams(d), d)
    return init_cma(4, start, config.hyper_sigma, popsize=config.hyper_popsize, seed=rng)


def adapt_hyperparams(
    state: ControllerState,
    archive: Archive,
    snapshot_size: int,
    transform: WhitenTransform,
    test_points,
    test_f,
    config: ControllerConfig,
    rng: np.random.Generator,
) -> ControllerState:
    """One generation of the embedded CMA-ES over normalized hyper-parameters.

    The new surrogate setting is the decoded mean. If every candidate is
    non-viable the search restarts from the defaults.
    """
    d = archive.dimension

    def objective(u):
        return hyperparam_objective(
            u, archive, snapshot_size, transform, test_points, test_f,
            config.surrogate_factory,
        )

    _, generation = gen_cma(state.hyper_state, objective)
    if np.all(generation.fitnesses >= NON_VIABLE_PENALTY):
        state.hyper_state = init_hyper_state(d, config, rng)
        state.alpha = default_hyperparams(d)
    else:
        state.alpha = decode_hyperparams(state.hyper_state.mean, d)
    return state


class _TrueObjective:
    """Counts calls and tracks the best value seen."""

    def __init__(self, objective, target):
        self.objective = objective
        self.target = target
        self.calls = 0
        self.best_f = math.inf
        self.best_x = None

    def __call__(self, x):
        self.calls += 1
        value = float(self.objective(x))
        if value < self.best_f:
            self.best_f = value
            self.best_x = np.array(x, dtype=float)
        return value

    @property
    def hit_target(self) -> bool:
        return self.target is not None and self.best_f <= self.target


def run(
    objective: Callable[[np.ndarray], float],
    d: int,
    budget: int,
    config: Optional[ControllerConfig] = None,
    seed: int = 0,
    target: Optional[float] = None,
) -> RunRecord:
    """Minimize ``objective`` with IPOP restarts and surrogate assistance.

    Stops when ``target`` is reached or the next true generation would
    exceed ``budget`` evaluations. With ``config.use_surrogate`` False this
    is plain IPOP-CMA-ES.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    config = config or ControllerConfig()
    opt_rng, hyper_rng, restart_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)
    )
    f_true = _TrueObjective(objective, target)
    record = RunRecord(seed=seed)
    archive = Archive(d)
    base_popsize = config.popsize or config.gamma * default_popsize(d)
    policy = RestartPolicy(
        stop_tolfun=config.stop_tolfun,
        stop_tolx=config.stop_tolx,
        max_condition=config.max_condition,
        max_evaluations=budget,
    )

    def new_optimizer() -> OptimizerState:
        mean = restart_rng.uniform(config.init_lower, config.init_upper, d)
        return init_cma(
            d, mean, config.initial_sigma,
            popsize=base_popsize * policy.population_multiplier, seed=opt_rng,
        )

    opt = new_optimizer()
    fixed_alpha = config.hyperparams or default_hyperparams(d)
    ctl = ControllerState(
        err=config.initial_error,
        lifelength=0 if config.fixed_lifelength is None else config.fixed_lifelength,
        alpha=fixed_alpha,
        hyper_state=init_hyper_state(d, config, hyper_rng),
    )
    recent_best: list[float] = []
    last_measured = math.nan

    def log(kind: str) -> None:
        record.trace.append(
            TraceRow(
                generation=ctl.generation,
                evaluations=f_true.calls,
                kind=kind,
                best_f=f_true.best_f,
                err=ctl.err,
                measured_err=last_measured,
                lifelength=ctl.lifelength,
                alpha=ctl.alpha,
                popsize=opt.popsize,
                sigma=opt.sigma,
                restarts=policy.restarts_done,
            )
        )

    def true_generation():
        nonlocal opt
        _, gen = gen_cma(opt, f_true)
        ctl.generation += 1
        archive.append(gen.candidates, gen.fitnesses, ctl.generation)
        recent_best.append(gen.best_fitness)
        if config.record_candidates:
            record.candidates.append(gen.candidates.copy())
        log("true")
        return gen

    def budget_left() -> bool:
        return f_true.calls + opt.popsize <= budget and not f_true.hit_target

    def maybe_restart() -> bool:
        nonlocal opt
        if not config.restarts or not should_restart(opt, policy, recent_best):
            return False
        policy.register_restart()
        opt = new_optimizer()
        recent_best.clear()
        ctl.err = config.initial_error
        ctl.lifelength = 0 if config.fixed_lifelength is None else config.fixed_lifelength
        return True

    warmup = config.g_start if config.use_surrogate else math.inf
    while budget_left() and ctl.generation < warmup:
        true_generation()
        maybe_restart()

    while budget_left():
        if not config.use_surrogate:
            true_generation()
            maybe_restart()
            continue

        transform = WhitenTransform.from_state(opt)
        snapshot_size = len(archive)
        X, f = archive.recent(ctl.alpha.n_training)
        try:
            model = config.surrogate_factory(X, f, ctl.alpha, transform)
        except NonViableModel:
            model = None
        ctl.g_prev = ctl.generation

        if model is not None and ctl.lifelength > 0:
            def surrogate_objective(X, model=model):
                return -np.asarray(model.predict(X))

            for _ in range(ctl.lifelength):
                _, gen = gen_cma(opt, surrogate_objective, vectorized=True)
                ctl.generation += 1
                if config.record_candidates:
                    record.candidates.append(gen.candidates.copy())
                log("surrogate")

        gen = true_generation()
        if model is not None:
            last_measured = measure_surrogate_error(model, gen.candidates, gen.fitnesses)
            ctl.err = relax_error(ctl.err, last_measured, config.error_relaxation)
            if config.fixed_lifelength is None:
                ctl.lifelength = adjust_lifelength(
                    ctl.err, config.error_threshold, config.max_lifelength
                )
            record.trace[-1].err = ctl.err
            record.trace[-1].measured_err = last_measured
            record.trace[-1].lifelength = ctl.lifelength

        if config.adapt_hyperparams:
            adapt_hyperparams(
                ctl, archive, snapshot_size, transform,
                gen.candidates, gen.fitnesses, config, hyper_rng,
            )
            record.trace[-1].alpha = ctl.alpha
        maybe_restart()

    record.evaluations = f_true.calls
    record.best_f = f_true.best_f
    record.best_x = f_true.best_x
    record.success = f_true.hit_target
    record.restarts = policy.restarts_done
    return record
