"""Seeded benchmark batches: baseline IPOP-CMA-ES against the surrogate variants.

Run ``saacmes-bench --help`` (or ``python -m saacmes --help``) for the
command line. Three subcommands are provided:

``run``     one cell per (problem, dimension, algorithm)
``sweep``   a grid over the lifelength, the training-set size or gamma
``report``  recompute SP1 and speedups from trace files already on disk

Every run ``i`` of a cell uses seed ``seed + i`` both for the optimizer
and for the problem instance, so the baseline and the treated algorithm
see the same instances.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import re
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .controller import ControllerConfig, RunRecord, default_hyperparams, run
from .surrogate import SurrogateHyperParams
from .testbed import REGISTRY, TARGET_PRECISION, make_problem

log = logging.getLogger(__name__)

ALGORITHMS = ("cmaes", "saacm-fixed", "saacm-adaptive")
SWEEP_PARAMS = ("lifelength", "n_training", "gamma")
OUT_ENV = "SAACMES_OUT"
UNDEFINED = "undefined"

TRACE_FIELDS = (
    "generation", "evaluations", "kind", "best_delta", "err", "measured_err",
    "lifelength", "n_training", "c_base", "c_pow", "c_sigma", "popsize",
    "sigma", "restarts",
)
SUMMARY_FIELDS = (
    "cell", "problem", "dim", "algo", "gamma", "fixed_lifelength", "n_training",
    "runs", "successes", "success_rate", "sp1", "median_evaluations",
)


@dataclass(frozen=True)
class Cell:
    problem: str
    dim: int
    algo: str
    gamma: int = 1
    fixed_lifelength: Optional[int] = None
    n_training: Optional[int] = None

    @property
    def name(self) -> str:
        parts = [self.problem, f"d{self.dim}", self.algo, f"g{self.gamma}"]
        if self.fixed_lifelength is not None:
            parts.append(f"n{self.fixed_lifelength}")
        if self.n_training is not None:
            parts.append(f"N{self.n_training}")
        return "_".join(parts)

    def controller_config(self) -> ControllerConfig:
        if self.algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algo!r}")
        hp = None
        if self.n_training is not None:
            hp = replace(default_hyperparams(self.dim), n_training=self.n_training)
        return ControllerConfig(
            use_surrogate=self.algo != "cmaes",
            adapt_hyperparams=self.algo == "saacm-adaptive",
            fixed_lifelength=self.fixed_lifelength,
            hyperparams=hp,
            gamma=self.gamma,
        )


@dataclass
class ExperimentConfig:
    problems: list = field(default_factory=lambda: ["rotated_ellipsoid"])
    dims: list = field(default_factory=lambda: [10])
    algos: list = field(default_factory=lambda: ["cmaes", "saacm-adaptive"])
    runs: int = 15
    budget: int = 100_000
    seed: int = 0
    gamma: int = 1
    fixed_lifelength: Optional[int] = None
    n_training: Optional[int] = None
    out: Path = Path("results")
    jobs: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        for algo in self.algos:
            if algo not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGORITHMS}")
        for name in self.problems:
            if name not in REGISTRY:
                raise ValueError(f"unknown problem {name!r}")
        self.out = Path(self.out)

    def cells(self) -> list[Cell]:
        return [
            Cell(p, d, a, self.gamma,
                 self.fixed_lifelength if a != "cmaes" else None,
                 self.n_training if a != "cmaes" else None)
            for p in self.problems for d in self.dims for a in self.algos
        ]


# -- metrics ---------------------------------------------------------------

def sp1(records: Sequence[RunRecord]) -> Optional[float]:
    """Mean evaluations of successful runs over the success proportion.

    Returns None when no run succeeded.
    """
    if not records:
        raise ValueError("sp1 needs at least one record")
    hits = [r.evaluations for r in records if r.success]
    if not hits:
        return None
    return statistics.fmean(hits) / (len(hits) / len(records))


def speedup(baseline: Sequence[RunRecord], treated: Sequence[RunRecord]) -> Optional[float]:
    base, treat = sp1(baseline), sp1(treated)
    if base is None or treat is None:
        return None
    return base / treat


def success_rate(records: Sequence[RunRecord]) -> float:
    return sum(r.success for r in records) / len(records)


def median_evaluations(records: Sequence[RunRecord]) -> float:
    return float(statistics.median(r.evaluations for r in records))


# -- running ---------------------------------------------------------------

def run_single(cell: Cell, seed: int, budget: int) -> RunRecord:
    problem = make_problem(cell.problem, cell.dim, seed=seed)
    record = run(
        problem, cell.dim, budget, cell.controller_config(), seed=seed,
        target=problem.target,
    )
    record.f_opt = problem.f_opt
    return record


def _run_single_args(args):
    return run_single(*args)


def run_cell(cell: Cell, runs: int, budget: int, seed: int = 0, jobs: int = 1) -> list[RunRecord]:
    tasks = [(cell, seed + i, budget) for i in range(runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_single_args, tasks))
    return [run_single(*t) for t in tasks]


# -- CSV output ------------------------------------------------------------

def fmt(value) -> str:
    if value is None:
        return UNDEFINED
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.17g}"
    return str(value)


def write_trace(path: Path, record: RunRecord, f_opt: float = 0.0) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_FIELDS)
        for row in record.trace:
            a = row.alpha
            writer.writerow([fmt(v) for v in (
                row.generation, row.evaluations, row.kind, row.best_f - f_opt,
                row.err, row.measured_err, row.lifelength, a.n_training,
                float(a.c_base), float(a.c_pow), float(a.c_sigma), row.popsize,
                float(row.sigma), row.restarts,
            )])


def read_trace(path: Path) -> RunRecord:
    """Rebuild the summary fields of a run from its trace file."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    seed = int(re.search(r"_run(\d+)\.csv$", str(path)).group(1))
    record = RunRecord(seed=seed)
    if rows:
        last = rows[-1]
        record.evaluations = int(last["evaluations"])
        record.best_f = float(last["best_delta"])
        record.restarts = int(last["restarts"])
        record.success = record.best_f <= TARGET_PRECISION
    return record


def summary_row(cell: Cell, records: Sequence[RunRecord]) -> dict:
    return {
        "cell": cell.name,
        "problem": cell.problem,
        "dim": cell.dim,
        "algo": cell.algo,
        "gamma": cell.gamma,
        "fixed_lifelength": "" if cell.fixed_lifelength is None else cell.fixed_lifelength,
        "n_training": "" if cell.n_training is None else cell.n_training,
        "runs": len(records),
        "successes": sum(r.success for r in records),
        "success_rate": success_rate(records),
        "sp1": sp1(records),
        "median_evaluations": median_evaluations(records),
    }


def write_rows(path: Path, fields: Sequence[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([fmt(row[k]) for k in fields])


def _ensure_dir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"output directory {path} is not writable")
    return path


def record_cell(out: Path, cell: Cell, records: Sequence[RunRecord]) -> dict:
    trace_dir = _ensure_dir(out / "traces")
    for rec in records:
        write_trace(trace_dir / f"{cell.name}_run{rec.seed}.csv", rec,
                    rec.f_opt)
    row = summary_row(cell, records)
    write_rows(out / f"summary_{cell.name}.csv", SUMMARY_FIELDS, [row])
    return row


def speedup_rows(results: dict) -> list[dict]:
    """Speedups of every non-baseline cell against the cmaes cell of the same problem."""
    rows = []
    for cell, records in results.items():
        if cell.algo == "cmaes":
            continue
        base_cell = Cell(cell.problem, cell.dim, "cmaes", cell.gamma)
        if base_cell not in results:
            continue
        rows.append({
            "problem": cell.problem,
            "dim": cell.dim,
            "cell": cell.name,
            "baseline_sp1": sp1(results[base_cell]),
            "sp1": sp1(records),
            "speedup": speedup(results[base_cell], records),
        })
    return rows


SPEEDUP_FIELDS = ("problem", "dim", "cell", "baseline_sp1", "sp1", "speedup")


def run_experiment(config: ExperimentConfig) -> dict:
    """Run every cell of ``config`` and write traces, summaries and speedups."""
    out = _ensure_dir(config.out)
    results = {}
    for cell in config.cells():
        log.info("running %s (%d runs)", cell.name, config.runs)
        results[cell] = run_cell(cell, config.runs, config.budget, config.seed, config.jobs)
        record_cell(out, cell, results[cell])
    for problem in config.problems:
        rows = [r for r in speedup_rows(results) if r["problem"] == problem]
        write_rows(out / f"speedup_{problem}.csv", SPEEDUP_FIELDS, rows)
    return results


def run_sweep(config: ExperimentConfig, param: str, values: Sequence[int]) -> list[dict]:
    """Speedup of one surrogate algorithm over the baseline along a grid."""
    if param not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {param!r}")
    out = _ensure_dir(config.out)
    algo = next((a for a in config.algos if a != "cmaes"), "saacm-fixed")
    rows = []
    baselines = {}
    for problem in config.problems:
        for d in config.dims:
            for value in values:
                gamma = value if param == "gamma" else config.gamma
                cell = Cell(
                    problem, d, algo, gamma,
                    value if param == "lifelength" else config.fixed_lifelength,
                    value if param == "n_training" else config.n_training,
                )
                base_cell = Cell(problem, d, "cmaes", gamma)
                if base_cell not in baselines:
                    baselines[base_cell] = run_cell(base_cell, config.runs, config.budget, config.seed, config.jobs)
                    record_cell(out, base_cell, baselines[base_cell])
                records = run_cell(cell, config.runs, config.budget, config.seed, config.jobs)
                record_cell(out, cell, records)
                rows.append({
                    "problem": problem, "dim": d, "param": param, "value": value,
                    "baseline_sp1": sp1(baselines[base_cell]), "sp1": sp1(records),
                    "speedup": speedup(baselines[base_cell], records),
                    "success_rate": success_rate(records),
                    "median_evaluations": median_evaluations(records),
                })
    write_rows(out / f"sweep_{param}.csv", SWEEP_FIELDS, rows)
    return rows


SWEEP_FIELDS = (
    "problem", "dim", "param", "value", "baseline_sp1", "sp1", "speedup",
    "success_rate", "median_evaluations",
)

_CELL_RE = re.compile(
    r"^(?P<problem>.+)_d(?P<dim>\d+)_(?P<algo>cmaes|saacm-fixed|saacm-adaptive)"
    r"_g(?P<gamma>\d+)(?:_n(?P<life>\d+))?(?:_N(?P<ntr>\d+))?_run(?P<seed>\d+)\.csv$"
)


def report(out: Path) -> list[dict]:
    """Recompute summaries and speedups from ``out/traces``."""
    out = Path(out)
    grouped: dict[Cell, list] = {}
    for path in sorted((out / "traces").glob("*.csv")):
        m = _CELL_RE.match(path.name)
        if not m:
            log.warning("skipping unrecognized trace file %s", path.name)
            continue
        cell = Cell(
            m["problem"], int(m["dim"]), m["algo"], int(m["gamma"]),
            int(m["life"]) if m["life"] else None,
            int(m["ntr"]) if m["ntr"] else None,
        )
        grouped.setdefault(cell, []).append(read_trace(path))
    for records in grouped.values():
        records.sort(key=lambda r: r.seed)
    rows = [summary_row(c, r) for c, r in grouped.items()]
    write_rows(out / "report_summary.csv", SUMMARY_FIELDS, rows)
    write_rows(out / "report_speedup.csv", SPEEDUP_FIELDS, speedup_rows(grouped))
    return rows


# -- command line ----------------------------------------------------------

def read_config_file(path: Path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _csv_list(text: str) -> list[str]:
    return [s.strip() for s in str(text).split(",") if s.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="saacmes-bench",
        description="Benchmark IPOP-CMA-ES against self-adaptive surrogate-assisted variants.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_args(p):
        p.add_argument("--config", type=Path, help="flat key = value file; flags win")
        p.add_argument("--problem", help="comma-separated problem names")
        p.add_argument("--dim", help="comma-separated dimensions")
        p.add_argument("--algo", help=f"comma-separated, from {', '.join(ALGORITHMS)}")
        p.add_argument("--runs", type=int)
        p.add_argument("--budget", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--gamma", type=int)
        p.add_argument("--fixed-lifelength", type=int)
        p.add_argument("--n-training", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--out", type=Path, help=f"output directory (env {OUT_ENV})")

    experiment_args(sub.add_parser("run", help="run benchmark cells"))
    sweep = sub.add_parser("sweep", help="speedup along a parameter grid")
    experiment_args(sweep)
    sweep.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    sweep.add_argument("--values", required=True, help="comma-separated integers")
    rep = sub.add_parser("report", help="recompute SP1/speedup from trace CSVs")
    rep.add_argument("--out", type=Path)
    return parser


def config_from_args(args) -> ExperimentConfig:
    values = read_config_file(args.config) if args.config else {}
    for key in ("problem", "dim", "algo", "runs", "budget", "seed", "gamma",
                "fixed_lifelength", "n_training", "jobs"):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    out = args.out or os.environ.get(OUT_ENV) or values.get("out") or "results"

    def opt_int(key):
        return int(values[key]) if values.get(key) not in (None, "") else None

    return ExperimentConfig(
        problems=_csv_list(values.get("problem", "rotated_ellipsoid")),
        dims=[int(d) for d in _csv_list(values.get("dim", "10"))],
        algos=_csv_list(values.get("algo", "cmaes,saacm-adaptive")),
        runs=int(values.get("runs", 15)),
        budget=int(values.get("budget", 100_000)),
        seed=int(values.get("seed", 0)),
        gamma=int(values.get("gamma", 1)),
        fixed_lifelength=opt_int("fixed_lifelength"),
        n_training=opt_int("n_training"),
        jobs=int(values.get("jobs", 1)),
        out=Path(out),
    )


def _print_rows(rows: Sequence[dict], fields: Sequence[str]) -> None:
    print("\t".join(fields))
    for row in rows:
        print("\t".join(fmt(row[k]) for k in fields))


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    try:
        if args.command == "report":
            out = args.out or os.environ.get(OUT_ENV) or "results"
            _print_rows(report(Path(out)), SUMMARY_FIELDS)
            return 0
        config = config_from_args(args)
        if args.command == "run":
            results = run_experiment(config)
            _print_rows([summary_row(c, r) for c, r in results.items()], SUMMARY_FIELDS)
        else:
            values = [int(v) for v in _csv_list(args.values)]
            _print_rows(run_sweep(config, args.param, values), SWEEP_FIELDS)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
