"""Geometry contract shared by every embedded manifold.

Points and tangent vectors are plain ``numpy`` arrays in ambient
coordinates. A tangent vector carries no reference to its base point; the
caller keeps track of which point a vector is attached to.

All randomness goes through :func:`make_rng`, which wraps
``numpy.random.default_rng`` (PCG64). Seeds may be integers or
``numpy.random.SeedSequence`` objects; use :func:`spawn_seeds` to derive
independent child streams for parallel work.
"""

from abc import ABC, abstractmethod

import numpy as np

TOL_POINT = 1e-8
TOL_TANGENT = 1e-8


class ContractError(ValueError):
    """Inputs violate an operation's preconditions (shape, sign, ...)."""


class InvalidPointError(ContractError):
    """An array does not lie on the manifold within ``TOL_POINT``."""


def make_rng(seed):
    """Return a PCG64 generator for ``seed`` (int, SeedSequence or Generator)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_seeds(seed, count):
    """Split ``seed`` into ``count`` statistically independent child seeds."""
    return np.random.SeedSequence(seed).spawn(count)


class Manifold(ABC):
    """Riemannian submanifold of a Euclidean space with the inherited metric.

    Subclasses provide the projection, the retraction, the membership
    residual and a sampler; the metric, norm and vector transport (projection
    at the target point) are shared.
    """

    kind = "manifold"

    def __init__(self, shape, dim):
        self._shape = tuple(int(s) for s in shape)
        self._dim = int(dim)

    @property
    def shape(self):
        """Shape of the ambient arrays representing points and tangents."""
        return self._shape

    @property
    def dim(self):
        """Intrinsic dimension."""
        return self._dim

    @property
    def params(self):
        return {}

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"

    def __eq__(self, other):
        return type(self) is type(other) and self.params == other.params

    def __hash__(self):
        return hash((type(self).__name__, tuple(self.params.items())))

    def _check_shape(self, a, what="array"):
        a = np.asarray(a, dtype=float)
        if a.shape != self._shape:
            raise ContractError(
                f"{what} has shape {a.shape}, expected {self._shape} for {self!r}"
            )
        return a

    def validate_point(self, x):
        x = self._check_shape(x, "point")
        res = self.check_point(x)
        if not res <= TOL_POINT:
            raise InvalidPointError(
                f"point is off {self!r}: membership residual {res:.3e}"
            )
        return x

    # metric ---------------------------------------------------------------

    def inner(self, x, u, v):
        """Ambient Euclidean inner product of two tangent vectors at ``x``."""
        u = self._check_shape(u, "tangent vector")
        v = self._check_shape(v, "tangent vector")
        return float(np.vdot(u, v))

    def norm(self, x, v):
        return float(np.linalg.norm(v))

    # geometry -------------------------------------------------------------

    def project(self, x, w):
        """Orthogonal projection of the ambient array ``w`` onto T_x M."""
        x = self.validate_point(x)
        w = self._check_shape(w, "ambient array")
        return self._project(x, w)

    def retract(self, x, v):
        """Map the tangent vector ``v`` at ``x`` back onto the manifold."""
        x = self._check_shape(x, "point")
        v = self._check_shape(v, "tangent vector")
        return self._retract(x, v)

    def transport(self, x_from, x_to, v):
        """Vector transport by projection onto the tangent space at ``x_to``."""
        x_to = self.validate_point(x_to)
        v = self._check_shape(v, "tangent vector")
        return self._project(x_to, v)

    def check_point(self, x):
        """Membership defect; zero for exact members."""
        return self._point_residual(np.asarray(x, dtype=float))

    def check_tangent(self, x, v):
        """Norm of the component of ``v`` normal to T_x M."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return float(np.linalg.norm(v - self._project(x, v)))

    def random_point(self, seed):
        return self._random_point(make_rng(seed))

    def random_tangent(self, x, seed):
        """Unit-norm tangent vector at ``x`` with a rotation-invariant law."""
        rng = make_rng(seed)
        x = self.validate_point(x)
        while True:
            v = self._project(x, rng.standard_normal(self._shape))
            nrm = np.linalg.norm(v)
            if nrm > 0:
                return v / nrm

    def zero_vector(self, x):
        return np.zeros(self._shape)

    # subclass hooks -------------------------------------------------------

    @abstractmethod
    def _project(self, x, w):
        ...

    @abstractmethod
    def _retract(self, x, v):
        ...

    @abstractmethod
    def _point_residual(self, x):
        ...

    @abstractmethod
    def _random_point(self, rng):
        ...
