# %% [markdown]
# # Manifolds as embedded submanifolds
#
# Points and tangent vectors are plain numpy arrays in the ambient space.
# Each manifold supplies projection onto the tangent space, a retraction and
# projection-based vector transport.

# %%
import numpy as np

from rgmm import Grassmann, Oblique, Sphere, Stiefel, principal_angles

sphere = Sphere(3)
x = sphere.random_point(seed=0)
v = sphere.random_tangent(x, seed=1)
print("x on sphere:", x, "residual", sphere.check_point(x))
print("<x, v> =", x @ v)

# %% [markdown]
# Retraction is first order: R_x(t v) and x + t v agree up to O(t^2).

# %%
for t in (1e-1, 1e-2, 1e-3):
    gap = np.linalg.norm(sphere.retract(x, t * v) - (x + t * v))
    print(f"t={t:g}  |R_x(tv) - (x+tv)| = {gap:.2e}  ratio to t^2 = {gap / t**2:.3f}")

# %% [markdown]
# Stiefel uses the polar retraction; Grassmann shares it, with horizontal
# tangent vectors (X^T V = 0).

# %%
st = Stiefel(6, 2)
X = st.random_point(2)
V = 3.0 * st.random_tangent(X, 3)
Y = st.retract(X, V)
print("Y^T Y - I:", np.linalg.norm(Y.T @ Y - np.eye(2)))

gr = Grassmann(6, 2)
H = gr.project(X, np.random.default_rng(4).standard_normal((6, 2)))
print("X^T H on Grassmann:", np.linalg.norm(X.T @ H))
Q, _ = np.linalg.qr(np.random.default_rng(5).standard_normal((2, 2)))
print("angles between span(X) and span(XQ):", principal_angles(X, X @ Q))

# %% [markdown]
# The oblique manifold is a product of spheres, one per column.

# %%
ob = Oblique(3, 5)
Z = ob.random_point(6)
print("column norms:", np.linalg.norm(Z, axis=0))

# %% [markdown]
# Transport moves a tangent vector from one tangent space to another by
# projecting it at the destination.

# %%
y = sphere.random_point(7)
w = sphere.transport(x, y, v)
print("<y, T(v)> =", y @ w)
