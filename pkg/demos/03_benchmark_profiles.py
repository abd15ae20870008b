# %% [markdown]
# # Benchmarks and performance profiles
#
# A suite pairs problem instances with seeds. Every solver on an
# (instance, seed) pair starts from the same point. Runs that stop for any
# reason other than the gradient tolerance count as failures.

# %%
import os
import tempfile

from rgmm import bench

specs = bench.make_specs(
    [("dis", {"n": 60, "p": 3}), ("tsvd", {"n": 40, "m": 30, "p": 4}),
     ("maxcut", {"n": 30, "p": 2})],
    seeds=range(5),
)
records = bench.run_suite(specs, jobs=2)
print(len(records), "runs;", sum(r.success for r in records), "succeeded")

# %% [markdown]
# pi_S(tau) is the fraction of problems on which solver S is within a factor
# tau of the best solver. Ratios are compared exactly, so tied solvers all
# score at tau = 1.

# %%
for metric in ("iterations", "function_evals", "time"):
    table = bench.performance_profile(records, metric)
    row = "  ".join(f"{s}: {table.pi(s)[0]:.2f}" for s in table.solvers)
    print(f"pi(1) by {metric:15s} {row}")

# %%
out = tempfile.mkdtemp()
bench.write_records_csv(records, os.path.join(out, "records.csv"))
table = bench.performance_profile(records, "iterations")
bench.write_profile_csv(table, os.path.join(out, "profile_iterations.csv"))
bench.write_profile_svg(table, os.path.join(out, "profile_iterations.svg"))
print("wrote", sorted(os.listdir(out)), "to", out)

# %% [markdown]
# Safeguard usage for the momentum solver: how often the curvature test or
# the gradient-related test rejected the momentum direction.

# %%
rates = bench.safeguard_rates(records, "rgmm")
print(f"{rates['iterations']} iterations, curvature fallback "
      f"{100 * rates['curvature_fallback']:.2f}%, gradient-related fallback "
      f"{100 * rates['gradient_related_fallback']:.2f}%")
