"""Sphere, oblique, Stiefel and Grassmann manifolds.

Sphere and oblique points are normalised by the metric projection
``(x + v) / ||x + v||`` (column by column for the oblique manifold).
Stiefel and Grassmann points use the polar retraction

    R_X(V) = (X + V) ((X + V)^T (X + V))^{-1/2},

with the inverse square root taken from an eigendecomposition of the small
p x p Gram matrix. Grassmann points are n x p orthonormal representatives;
two representatives of the same subspace compare equal through
:func:`principal_angles`.
"""

import numpy as np

from .geometry import ContractError, Manifold


def _sym(a):
    return 0.5 * (a + a.T)


def _inv_sqrt_psd(g):
    w, q = np.linalg.eigh(g)
    return (q / np.sqrt(w)) @ q.T


def polar_retraction(x, v):
    y = x + v
    return y @ _inv_sqrt_psd(y.T @ y)


def principal_angles(x, y):
    """Principal angles (radians, ascending) between span(x) and span(y).

    Both arguments must have orthonormal columns.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    # the arcsin form is accurate for small angles, where arccos loses digits
    proj = y - x @ (x.T @ y)
    s = np.linalg.svd(proj, compute_uv=False)
    return np.sort(np.arcsin(np.clip(s, 0.0, 1.0)))


class Sphere(Manifold):
    """Unit sphere S^{n-1} in R^n."""

    kind = "sphere"

    def __init__(self, n):
        if n < 2:
            raise ContractError(f"sphere needs n >= 2, got {n}")
        self.n = int(n)
        super().__init__((self.n,), self.n - 1)

    @property
    def params(self):
        return {"n": self.n}

    def _project(self, x, w):
        return w - np.dot(x, w) * x

    def _retract(self, x, v):
        y = x + v
        return y / np.linalg.norm(y)

    def _point_residual(self, x):
        return float(abs(np.dot(x, x) - 1.0))

    def _random_point(self, rng):
        x = rng.standard_normal(self.n)
        return x / np.linalg.norm(x)


class Oblique(Manifold):
    """n x m matrices whose m columns each have unit norm."""

    kind = "oblique"

    def __init__(self, n, m):
        if n < 2 or m < 1:
            raise ContractError(f"oblique needs n >= 2 and m >= 1, got ({n}, {m})")
        self.n = int(n)
        self.m = int(m)
        super().__init__((self.n, self.m), self.m * (self.n - 1))

    @property
    def params(self):
        return {"n": self.n, "m": self.m}

    def _project(self, x, w):
        return w - x * np.sum(x * w, axis=0)

    def _retract(self, x, v):
        y = x + v
        return y / np.linalg.norm(y, axis=0)

    def _point_residual(self, x):
        return float(np.max(np.abs(np.sum(x * x, axis=0) - 1.0)))

    def _random_point(self, rng):
        x = rng.standard_normal(self._shape)
        return x / np.linalg.norm(x, axis=0)


class Stiefel(Manifold):
    """n x p matrices with orthonormal columns."""

    kind = "stiefel"

    def __init__(self, n, p):
        if not 1 <= p <= n:
            raise ContractError(f"stiefel needs 1 <= p <= n, got ({n}, {p})")
        self.n = int(n)
        self.p = int(p)
        super().__init__((self.n, self.p), self.n * self.p - self.p * (self.p + 1) // 2)

    @property
    def params(self):
        return {"n": self.n, "p": self.p}

    def _project(self, x, w):
        return w - x @ _sym(x.T @ w)

    def _retract(self, x, v):
        return polar_retraction(x, v)

    def _point_residual(self, x):
        return float(np.linalg.norm(x.T @ x - np.eye(self.p)))

    def _random_point(self, rng):
        q, r = np.linalg.qr(rng.standard_normal(self._shape))
        # sign fix makes the law Haar rather than QR-implementation dependent
        return q * np.where(np.diag(r) < 0, -1.0, 1.0)


class Grassmann(Stiefel):
    """p-dimensional subspaces of R^n, stored as orthonormal n x p bases.

    Cost functions defined on it must satisfy f(XQ) == f(X) for orthogonal Q.
    """

    kind = "grassmann"

    def __init__(self, n, p):
        super().__init__(n, p)
        self._dim = self.p * (self.n - self.p)

    def _project(self, x, w):
        return w - x @ (x.T @ w)

    def dist(self, x, y):
        """Geodesic distance, the 2-norm of the principal angles."""
        return float(np.linalg.norm(principal_angles(x, y)))

    def same_subspace(self, x, y, tol=1e-8):
        return bool(np.max(principal_angles(x, y), initial=0.0) <= tol)


MANIFOLDS = {
    "sphere": Sphere,
    "oblique": Oblique,
    "stiefel": Stiefel,
    "grassmann": Grassmann,
}
