"""Smooth test problems on embedded manifolds, with dense-decomposition oracles.

Every builder returns a :class:`Problem` holding the cost and its Euclidean
(ambient) gradient. The Riemannian gradient is the projection of the
latter, computed in :mod:`rgmm.solver`.

Max-cut sign convention: for a graph Laplacian ``L`` and ``Y`` of shape
r x n with unit columns the cost is ``f(Y) = -0.5 * <L, Y^T Y>``. Minimising
``f`` maximises the relaxed cut, whose value is ``-f(Y) / 2``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import ContractError, Manifold, make_rng
from .manifolds import Grassmann, Oblique, Sphere, Stiefel


@dataclass(frozen=True)
class Optimum:
    """Reference optimum of a problem.

    ``source`` records how it was obtained, e.g. ``"eigh"`` for a dense
    eigendecomposition or ``"bound"`` when ``value`` is only a lower bound.
    """

    value: float
    point: Optional[np.ndarray] = None
    source: str = ""
    exact: bool = True


@dataclass(frozen=True)
class Problem:
    manifold: Manifold
    cost: Callable[[np.ndarray], float]
    euclidean_grad: Callable[[np.ndarray], np.ndarray]
    name: str = "problem"
    optimum: Optional[Optimum] = None
    data: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def f_low(self):
        """Lower bound on the cost, when one is known."""
        return None if self.optimum is None else self.optimum.value


def _symmetric(a, what="A"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError(f"{what} must be square, got shape {a.shape}")
    scale = np.linalg.norm(a)
    if np.linalg.norm(a - a.T) > 1e-12 * scale:
        raise ContractError(f"{what} is not symmetric")
    return a


def random_symmetric(n, seed):
    """(G + G^T) / 2 with standard normal G."""
    g = make_rng(seed).standard_normal((n, n))
    return 0.5 * (g + g.T)


def rayleigh(a):
    """Minimise x^T A x on the unit sphere."""
    a = _symmetric(a)
    n = a.shape[0]
    w, q = np.linalg.eigh(a)
    return Problem(
        manifold=Sphere(n),
        cost=lambda x: float(x @ a @ x),
        euclidean_grad=lambda x: 2.0 * (a @ x),
        name=f"rayleigh(n={n})",
        optimum=Optimum(float(w[0]), q[:, 0], "eigh"),
        data={"A": a},
    )


def dominant_invariant_subspace(a, p):
    """Minimise -trace(X^T A X) over p-dimensional subspaces."""
    a = _symmetric(a)
    n = a.shape[0]
    w, q = np.linalg.eigh(a)
    return Problem(
        manifold=Grassmann(n, p),
        cost=lambda x: -float(np.sum(x * (a @ x))),
        euclidean_grad=lambda x: -2.0 * (a @ x),
        name=f"dis(n={n},p={p})",
        optimum=Optimum(-float(np.sum(w[-p:])), q[:, -p:], "eigh"),
        data={"A": a},
    )


def maxcut_elliptope(lap, r):
    """Rank-r Burer-Monteiro form of the max-cut SDP on the oblique manifold.

    The optimum of the rank-restricted problem is not known in closed form;
    ``optimum`` carries the valid lower bound ``-n * lambda_max(L) / 2``.
    """
    lap = _symmetric(lap, "L")
    n = lap.shape[0]
    if r < 1:
        raise ContractError(f"rank must be >= 1, got {r}")
    lam_max = float(np.linalg.eigvalsh(lap)[-1]) if n else 0.0

    def cost(y):
        return -0.5 * float(np.sum(y * (y @ lap)))

    def egrad(y):
        return -(y @ lap)

    m = Oblique(r, n) if r >= 2 else _OneRowOblique(n)
    return Problem(
        manifold=m,
        cost=cost,
        euclidean_grad=egrad,
        name=f"maxcut(n={n},r={r})",
        optimum=Optimum(-0.5 * n * lam_max, None, "bound", exact=False),
        data={"L": lap},
    )


class _OneRowOblique(Oblique):
    # r = 1 makes every column a point of S^0 = {-1, +1}: zero-dimensional,
    # so n >= 2 in the Oblique constructor does not apply.
    def __init__(self, n):
        self.n = 1
        self.m = int(n)
        Manifold.__init__(self, (1, self.m), 0)


def laplacian(weights):
    w = np.asarray(weights, dtype=float)
    w = 0.5 * (w + w.T)
    np.fill_diagonal(w, 0.0)
    return np.diag(w.sum(axis=1)) - w


def random_graph_laplacian(n, seed, density=0.5):
    rng = make_rng(seed)
    upper = np.triu((rng.random((n, n)) < density).astype(float), 1)
    return laplacian(upper + upper.T)


def procrustes(a, b):
    """Minimise ||A X - B||_F^2 over n x p matrices with orthonormal columns.

    ``A`` is m x n and ``B`` is m x p. The SVD oracle (polar factor of A^T B)
    is attached when X is square or when A^T A is a multiple of the
    identity; in both cases ||A X||_F is constant on the manifold.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ContractError(f"incompatible shapes A{a.shape}, B{b.shape}")
    n, p = a.shape[1], b.shape[1]
    if p > n:
        raise ContractError(f"B has more columns ({p}) than A ({n})")
    ata = a.T @ a
    atb = a.T @ b

    def cost(x):
        r = a @ x - b
        return float(np.sum(r * r))

    def egrad(x):
        return 2.0 * (ata @ x - atb)

    optimum = None
    c = np.trace(ata) / n
    if p == n or np.linalg.norm(ata - c * np.eye(n)) <= 1e-12 * np.linalg.norm(ata):
        u, _, vt = np.linalg.svd(atb, full_matrices=False)
        x_star = u @ vt
        optimum = Optimum(cost(x_star), x_star, "svd")
    return Problem(
        manifold=Stiefel(n, p),
        cost=cost,
        euclidean_grad=egrad,
        name=f"procrustes(n={n},p={p})",
        optimum=optimum,
        data={"A": a, "B": b},
    )


def truncated_svd(a, p):
    """Minimise -||A X||_F^2 over p-dimensional subspaces of R^n (A is m x n)."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ContractError(f"A must be a matrix, got shape {a.shape}")
    m, n = a.shape
    if not 1 <= p <= min(m, n):
        raise ContractError(f"need 1 <= p <= min(m, n) = {min(m, n)}, got {p}")
    ata = a.T @ a
    _, s, vt = np.linalg.svd(a, full_matrices=False)
    return Problem(
        manifold=Grassmann(n, p),
        cost=lambda x: -float(np.sum((a @ x) ** 2)),
        euclidean_grad=lambda x: -2.0 * (ata @ x),
        name=f"tsvd(m={m},n={n},p={p})",
        optimum=Optimum(-float(np.sum(s[:p] ** 2)), vt[:p].T, "svd"),
        data={"A": a},
    )


# random instances -----------------------------------------------------------


def random_procrustes(n, p, seed, noise=0.1):
    """Procrustes instance with A = 2 Q (Q orthogonal) and a noisy target."""
    rng = make_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    a = 2.0 * q
    x_true = Stiefel(n, p).random_point(rng)
    b = a @ x_true + noise * rng.standard_normal((n, p))
    return procrustes(a, b)


def build(name, seed=0, **size):
    """Build a random instance by short name; the seed drives only the data."""
    n = size.get("n")
    p = size.get("p")
    m = size.get("m")
    if name == "rayleigh":
        return rayleigh(random_symmetric(n, seed))
    if name == "dis":
        return dominant_invariant_subspace(random_symmetric(n, seed), p or 3)
    if name == "tsvd":
        rows = m if m is not None else n
        return truncated_svd(make_rng(seed).standard_normal((rows, n)), p or 1)
    if name == "procrustes":
        return random_procrustes(n, p or n, seed)
    if name == "maxcut":
        return maxcut_elliptope(random_graph_laplacian(n, seed), p or 2)
    raise ContractError(f"unknown problem {name!r}; choose from {sorted(BUILDERS)}")


BUILDERS = ("rayleigh", "dis", "tsvd", "procrustes", "maxcut")


# plain-text matrices ----------------------------------------------------------


def read_matrix(path):
    """Read a matrix stored as a ``rows cols`` header and whitespace rows."""
    with open(path) as fh:
        lines = [ln for ln in (l.strip() for l in fh) if ln and not ln.startswith("#")]
    if not lines:
        raise ContractError(f"{path}: empty matrix file")
    try:
        rows, cols = (int(t) for t in lines[0].split())
        values = np.array([[float(t) for t in ln.split()] for ln in lines[1:]])
    except ValueError as exc:
        raise ContractError(f"{path}: malformed matrix file ({exc})") from None
    if values.shape != (rows, cols) and not (rows * cols == 0 and values.size == 0):
        raise ContractError(f"{path}: header says {rows}x{cols}, found {values.shape}")
    return values.reshape(rows, cols)


def write_matrix(path, a):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]} {a.shape[1]}\n")
        for row in a:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


# derivative checks ------------------------------------------------------------


@dataclass
class TaylorCheck:
    steps: np.ndarray
    residuals: np.ndarray
    slope: float
    lipschitz: float
    skipped: bool


def finite_difference_check(problem, x, v, steps=None, floor=1e-14):
    """Taylor remainder test of the gradient along the retraction curve.

    Computes r(t) = |f(R_x(t v)) - f(x) - t <grad f(x), v>| and returns the
    least-squares slope of log r against log t (about 2 for a correct
    gradient) together with the implied local constant max 2 r(t) / t^2.
    Residuals below ``floor * max(1, |f(x)|)`` are round-off and are left
    out of the fit; with fewer than two points left the slope is NaN and
    ``skipped`` is set.
    """
    man = problem.manifold
    if steps is None:
        steps = np.logspace(-2, -6, 9)
    steps = np.asarray(steps, dtype=float)
    f0 = problem.cost(x)
    g = man.project(x, problem.euclidean_grad(x))
    slope0 = man.inner(x, g, v)
    res = np.array(
        [abs(problem.cost(man.retract(x, t * v)) - f0 - t * slope0) for t in steps]
    )
    keep = res > floor * max(1.0, abs(f0))
    lipschitz = float(np.max(2.0 * res / steps**2))
    if keep.sum() < 2:
        return TaylorCheck(steps, res, float("nan"), lipschitz, True)
    slope = float(np.polyfit(np.log(steps[keep]), np.log(res[keep]), 1)[0])
    return TaylorCheck(steps, res, slope, lipschitz, False)


def estimate_lipschitz(problem, seed=0, trials=20, steps=None):
    """Largest Taylor constant seen over random (x, v) pairs."""
    man = problem.manifold
    rng = make_rng(seed)
    best = 0.0
    for _ in range(trials):
        x = man.random_point(rng)
        v = man.random_tangent(x, rng)
        best = max(best, finite_difference_check(problem, x, v, steps).lipschitz)
    return best
