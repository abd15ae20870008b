# %% [markdown]
# # Checking derivatives and the worst-case guarantees
#
# A Taylor remainder test validates a gradient and yields a local smoothness
# constant L. With L in hand, each run can be audited against the
# backtracking bound and the complexity inequalities.

# %%
import numpy as np

from rgmm import SolverConfig, finite_difference_check, rayleigh, solve
from rgmm.problems import estimate_lipschitz
from rgmm.solver import complexity_audit, lemma1_audit

problem = rayleigh(np.diag(np.linspace(1.0, 4.0, 10)))
x = problem.manifold.random_point(0)
v = problem.manifold.random_tangent(x, 1)
chk = finite_difference_check(problem, x, v)
print(f"Taylor slope {chk.slope:.3f} (2 for a correct gradient), local L {chk.lipschitz:.3f}")

# %% [markdown]
# A wrong gradient shows up as slope 1.

# %%
from rgmm import Problem

bad = Problem(problem.manifold, problem.cost, lambda x: 3.0 * problem.data["A"] @ x)
print("slope with a wrong gradient:", round(finite_difference_check(bad, x, v).slope, 3))

# %% [markdown]
# The backtracking bound assumes every line search starts at step 1, so the
# initial-step safeguard is switched off here.

# %%
L = estimate_lipschitz(problem, seed=0, steps=np.logspace(0, -4, 9))
config = SolverConfig(safeguard_eta=False)
for seed in range(3):
    rec = solve(problem, problem.manifold.random_point(seed), config)
    lem = lemma1_audit(rec.trace, L, config)
    comp = complexity_audit(rec.trace, problem.f_low, config, rec.epsilon, rec.f0)
    print(f"seed {seed}: {rec.iterations} it, max backtracks "
          f"{max(it.backtracks for it in rec.trace)} <= bound {lem.bound}; "
          f"sum |g|^2 = {comp.grad_sq_sum:.3g} <= {comp.decrease_bound:.3g}")
