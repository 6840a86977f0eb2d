"""Watch the surrogate error of a plain CMA-ES run.

With the lifelength pinned to 0 the controller never optimizes the
surrogate; it only retrains it each generation and scores it on the next
batch of true evaluations. Random guessing would sit at 0.5.
"""
from saacmes import ControllerConfig, make_problem, run

problem = make_problem("rotated_ellipsoid", 10, seed=1)
config = ControllerConfig(fixed_lifelength=0, adapt_hyperparams=False)
record = run(problem, 10, 100_000, config, seed=1, target=problem.target)

print("reached target:", record.success, "after", record.evaluations, "evaluations")
print("generation  measured  relaxed")
for row in record.true_rows[10::40]:
    print(f"{row.generation:10d} {row.measured_err:9.3f} {row.err:8.3f}")
