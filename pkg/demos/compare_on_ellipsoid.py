"""Baseline IPOP-CMA-ES against surrogate assistance on the 10-D rotated ellipsoid.

The surrogate run keeps the default hyper-parameters and adapts only the
lifelength, which keeps this demo to a few seconds per run. Use the
``saacm-adaptive`` algorithm of the benchmark CLI for the full method.
"""
import statistics

from saacmes.harness import Cell, run_cell, sp1, speedup

RUNS = 3

baseline = run_cell(Cell("rotated_ellipsoid", 10, "cmaes"), RUNS, 100_000)
treated = run_cell(Cell("rotated_ellipsoid", 10, "saacm-fixed"), RUNS, 100_000)

for name, records in (("cmaes", baseline), ("surrogate", treated)):
    evals = [r.evaluations for r in records]
    print(f"{name:10s} evaluations {evals}  SP1 {sp1(records):.0f}")
print("speedup", round(speedup(baseline, treated), 2))

# how long the surrogate was trusted, sampled along the first run
rows = treated[0].true_rows
print("\ngeneration  evals  relaxed Err  lifelength")
for row in rows[10::max(1, len(rows) // 10)]:
    print(f"{row.generation:10d} {row.evaluations:6d} {row.err:11.3f} {row.lifelength:11d}")
print("median lifelength", statistics.median(r.lifelength for r in rows))
