"""Riemannian gradient method with momentum on embedded manifolds."""

from .geometry import ContractError, InvalidPointError, Manifold, make_rng, spawn_seeds
from .manifolds import Grassmann, Oblique, Sphere, Stiefel, principal_angles
from .problems import (
    Optimum,
    Problem,
    dominant_invariant_subspace,
    finite_difference_check,
    maxcut_elliptope,
    procrustes,
    rayleigh,
    truncated_svd,
)
from .solver import RunRecord, SolverConfig, solve

__all__ = [
    "ContractError",
    "InvalidPointError",
    "Manifold",
    "make_rng",
    "spawn_seeds",
    "Sphere",
    "Oblique",
    "Stiefel",
    "Grassmann",
    "principal_angles",
    "Problem",
    "Optimum",
    "rayleigh",
    "dominant_invariant_subspace",
    "maxcut_elliptope",
    "procrustes",
    "truncated_svd",
    "finite_difference_check",
    "SolverConfig",
    "RunRecord",
    "solve",
]
__version__ = "0.1.0"
