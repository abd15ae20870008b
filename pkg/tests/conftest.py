import numpy as np
import pytest

from rgmm.geometry import Manifold
from rgmm.manifolds import Grassmann, Oblique, Sphere, Stiefel

ACCEPTANCE_KEY = pytest.StashKey[list]()


class Euclidean(Manifold):
    """R^n as a trivially embedded manifold, for line-search checks."""

    kind = "euclidean"

    def __init__(self, n):
        self.n = n
        super().__init__((n,), n)

    @property
    def params(self):
        return {"n": self.n}

    def _project(self, x, w):
        return w.copy()

    def _retract(self, x, v):
        return x + v

    def _point_residual(self, x):
        return 0.0

    def _random_point(self, rng):
        return rng.standard_normal(self.n)


MANIFOLD_CASES = {
    "sphere": lambda: Sphere(5),
    "oblique": lambda: Oblique(4, 6),
    "stiefel": lambda: Stiefel(7, 3),
    "grassmann": lambda: Grassmann(8, 3),
}


@pytest.fixture(params=sorted(MANIFOLD_CASES))
def manifold(request):
    return MANIFOLD_CASES[request.param]()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


@pytest.fixture
def criterion(request):
    """Log one acceptance line; printed in the terminal summary."""
    lines = request.config.stash[ACCEPTANCE_KEY]

    def log(name, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        if passed is None:
            status = "INFO"
        lines.append(f"[{status}] {name}: {detail}")
        return passed

    return log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
