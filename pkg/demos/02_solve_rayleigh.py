# %% [markdown]
# # Smallest eigenvector by Riemannian optimization
#
# Minimise x^T A x on the unit sphere with the momentum method (rgmm), plain
# gradient descent (rgd) and Barzilai-Borwein steps (rbb). All three use a
# monotone Armijo line search and stop when |grad f| <= 1e-6 |grad f(x0)|.

# %%
from collections import Counter

import numpy as np

from rgmm import SolverConfig, rayleigh, solve
from rgmm.problems import random_symmetric

A = random_symmetric(100, seed=0)
problem = rayleigh(A)
x0 = problem.manifold.random_point(seed=1)
print("oracle (eigh) minimum:", problem.optimum.value)

# %%
for rule in ("rgmm", "rbb", "rgd"):
    rec = solve(problem, x0, SolverConfig(), rule=rule)
    err = abs(rec.final_f - problem.optimum.value) / abs(problem.optimum.value)
    print(f"{rule:5s} {rec.termination:20s} it={rec.iterations:5d} "
          f"fevals={rec.function_evals:5d} rel err={err:.1e}")

# %% [markdown]
# Every iteration is logged. The branch column shows which direction was
# used: the momentum direction, or one of the safeguards.

# %%
rec = solve(problem, x0, rule="rgmm")
for it in rec.trace[:8]:
    print(f"k={it.k:3d} f={it.f:+.8f} |g|={it.gnorm:.2e} eta0={it.eta0:.3g} "
          f"eta={it.eta:.3g} backtracks={it.backtracks} {it.branch}")

print(Counter(it.branch for it in rec.trace))

# %% [markdown]
# The callback sees the iterate, the direction diagnostics (alpha, beta, the
# BB scale) and the step statistics.

# %%
betas = []
solve(problem, x0, callback=lambda state, diag, stats: betas.append(diag.beta))
print("momentum coefficients beta, first few:", np.round(betas[1:6], 4))
