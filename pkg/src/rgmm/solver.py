"""Riemannian gradient method with momentum, baselines and run audits.

Three direction rules share one monotone Armijo loop:

``rgmm``
    d = -alpha g + beta s, where s is the transported previous step and
    (alpha, beta) minimise the two-dimensional quadratic model built from a
    scaled memoryless BFGS operator. Falls back to -lambda_max g when
    <s, y> <= 0, and to -lambda g when the direction is degenerate or not
    gradient-related.
``rbb``
    d = -lambda g with the clipped Barzilai-Borwein scale (monotone search).
``rgd``
    d = -g.

Every function evaluation, gradient, retraction and transport is counted,
and each iteration is logged so that the sufficient-decrease and
worst-case complexity inequalities can be checked after the fact.
"""

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .geometry import ContractError

STRATEGIES = ("direct", "inverse", "alternate")
RULES = ("rgmm", "rgd", "rbb")

# branch labels recorded per iteration
FIRST_ITER = "first_iter"
CURVATURE = "curvature_fallback"
MOMENTUM = "momentum"
GRAD_RELATED = "gradient_related_fallback"
DEGENERATE = "degenerate_fallback"
GRADIENT = "gradient"
BB = "bb"

# termination reasons
GRADIENT_TOLERANCE = "gradient_tolerance"
MAX_ITER = "max_iter"
MAX_TIME = "max_time"
MIN_STEP = "min_step"

DEGENERACY_TOL = 1e-14


class DegenerateDirection(ArithmeticError):
    """g and s are numerically collinear; the 2x2 model has no unique minimiser."""


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the solvers.

    ``epsilon`` is the absolute gradient-norm tolerance. When it is None,
    :func:`solve` uses ``tol_rel * ||grad f(x0)||``. The safeguarded first
    trial step is ``min(1, safeguard_factor * eta_prev ||d_prev|| / ||d||)``
    whenever ``||d|| > safeguard_ratio * eta_prev ||d_prev||``; with
    ``safeguard_eta=False`` every line search starts from 1.
    """

    gamma: float = 1e-4
    delta: float = 0.5
    epsilon: Optional[float] = None
    tol_rel: float = 1e-6
    c1: float = 1e-9
    c2: float = 1e9
    lambda_min: float = 1e-3
    lambda_max: float = 1e3
    lambda0: float = 1.0
    strategy: str = "direct"
    max_iter: int = 50_000
    max_time_seconds: float = 600.0
    min_step_size: float = 1e-10
    safeguard_eta: bool = True
    safeguard_ratio: float = 10.0
    safeguard_factor: float = 2.0
    momentum: bool = True

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ContractError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0.0 < self.delta < 1.0:
            raise ContractError(f"delta must lie in (0, 1), got {self.delta}")
        chain = (self.c1, self.lambda_min, self.lambda0, self.lambda_max, self.c2)
        if not (0.0 < chain[0] and all(a <= b for a, b in zip(chain, chain[1:]))):
            raise ContractError(
                "need 0 < c1 <= lambda_min <= lambda0 <= lambda_max <= c2, got "
                f"{chain}"
            )
        if self.strategy not in STRATEGIES:
            raise ContractError(f"strategy must be one of {STRATEGIES}")
        if self.epsilon is not None and self.epsilon < 0:
            raise ContractError("epsilon must be non-negative")
        if self.tol_rel < 0 or self.max_iter < 0 or self.min_step_size < 0:
            raise ContractError("tolerances and budgets must be non-negative")

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass
class Counters:
    function_evals: int = 0
    gradient_evals: int = 0
    retractions: int = 0
    transports: int = 0


@dataclass
class IterState:
    x: np.ndarray
    f: float
    g: np.ndarray
    k: int = 0
    prev_x: Optional[np.ndarray] = None
    prev_d: Optional[np.ndarray] = None
    prev_eta: Optional[float] = None
    prev_g: Optional[np.ndarray] = None


@dataclass
class DirectionDiagnostics:
    branch: str
    d: np.ndarray
    s: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    sy: float = float("nan")
    lam: float = float("nan")
    alpha: float = float("nan")
    beta: float = float("nan")
    rho: float = float("nan")
    grad_related_ok: bool = True


@dataclass
class LineSearchResult:
    eta: float
    backtracks: int
    f_new: float
    x_new: Optional[np.ndarray]
    accepted: bool


@dataclass(frozen=True)
class IterationLog:
    """One accepted iteration: values at x_k plus the step that left it."""

    k: int
    f: float
    gnorm: float
    gd: float
    dnorm: float
    eta0: float
    eta: float
    backtracks: int
    f_next: float
    branch: str


@dataclass
class RunRecord:
    rule: str
    iterations: int
    function_evals: int
    gradient_evals: int
    retraction_count: int
    transport_count: int
    wall_time: float
    termination: str
    final_point: np.ndarray
    final_f: float
    final_gnorm: float
    f0: float
    gnorm0: float
    epsilon: float
    trace: list = field(default_factory=list, repr=False)

    @property
    def success(self):
        return self.termination == GRADIENT_TOLERANCE


# building blocks ----------------------------------------------------------------


def riemannian_gradient(problem, x, counters=None):
    """Projection of the Euclidean gradient onto the tangent space at x."""
    if counters is not None:
        counters.gradient_evals += 1
    return problem.manifold.project(x, problem.euclidean_grad(x))


def armijo(problem, x, f_x, g, d, eta0=1.0, gamma=1e-4, delta=0.5,
           min_step_size=0.0, counters=None):
    """Backtracking line search along the retraction curve.

    Tries eta = eta0 * delta**j for j = 0, 1, ... and accepts the first
    trial with f(R_x(eta d)) <= f_x + gamma eta <g, d>. Each trial costs one
    function evaluation and one retraction. The accepted point and its cost
    are returned so the caller never evaluates them again. If eta ||d||
    falls below ``min_step_size`` before a trial is accepted, the search
    stops with ``accepted=False``.
    """
    man = problem.manifold
    gd = man.inner(x, g, d)
    if not gd < 0:
        raise ContractError(f"armijo needs a descent direction, got <g, d> = {gd}")
    if not 0.0 < eta0 <= 1.0:
        raise ContractError(f"eta0 must lie in (0, 1], got {eta0}")
    dnorm = man.norm(x, d)
    eta = eta0
    j = 0
    while True:
        if eta * dnorm < min_step_size:
            return LineSearchResult(eta, j, float("nan"), None, False)
        x_new = man.retract(x, eta * d)
        f_new = problem.cost(x_new)
        if counters is not None:
            counters.function_evals += 1
            counters.retractions += 1
        if f_new <= f_x + gamma * eta * gd:
            return LineSearchResult(eta, j, f_new, x_new, True)
        eta *= delta
        j += 1


def lambda_bb(s, y, strategy="direct", k=0, lambda_min=1e-3, lambda_max=1e3,
              inner=None):
    """Barzilai-Borwein scale clipped to [lambda_min, lambda_max].

    ``direct`` is ||s||^2 / <s, y>, ``inverse`` is <s, y> / ||y||^2 and
    ``alternate`` uses the direct form on even k and the inverse on odd k.
    """
    dot = inner or _dot
    sy = dot(s, y)
    if not sy > 0:
        raise ContractError(f"lambda_bb needs <s, y> > 0, got {sy}")
    if strategy == "alternate":
        strategy = "direct" if k % 2 == 0 else "inverse"
    if strategy == "direct":
        lam = dot(s, s) / sy
    elif strategy == "inverse":
        lam = sy / dot(y, y)
    else:
        raise ContractError(f"unknown strategy {strategy!r}")
    return min(lambda_max, max(lambda_min, lam))


def momentum_direction(g, s, y, lam, inner=None):
    """Closed-form minimiser of the two-dimensional memoryless-BFGS model.

    Returns (alpha, beta, d) with d = -alpha g + beta s. Raises
    :class:`DegenerateDirection` when ||g||^2 - <g, s>^2 / ||s||^2 is below
    ``DEGENERACY_TOL * ||g||^2``.
    """
    dot = inner or _dot
    gg = dot(g, g)
    gs = dot(g, s)
    gy = dot(g, y)
    ss = dot(s, s)
    sy = dot(s, y)
    if not (sy > 0 and ss > 0 and gg > 0 and lam > 0):
        raise ContractError("momentum_direction needs <s, y> > 0, s != 0, g != 0, lam > 0")
    gap = gg - gs * gs / ss
    if not gap >= DEGENERACY_TOL * gg:
        raise DegenerateDirection(f"g and s are collinear (gap {gap:.3e})")
    alpha = lam * (gg * sy - gy * gs) / (sy * gap)
    beta = (alpha * gy - gs) / sy
    return alpha, beta, -alpha * g + beta * s


def bfgs_operator_apply(s, y, lam, v, inner=None):
    """Scaled memoryless BFGS operator applied to v.

    B[v] = (v - <s, v> / ||s||^2 s) / lam + <y, v> / <s, y> y, which is
    self-adjoint, positive definite when <s, y> > 0, and maps s to y.
    """
    dot = inner or _dot
    sy = dot(s, y)
    ss = dot(s, s)
    if not (sy > 0 and ss > 0 and lam > 0):
        raise ContractError("bfgs_operator_apply needs <s, y> > 0, s != 0, lam > 0")
    return (v - (dot(s, v) / ss) * s) / lam + (dot(y, v) / sy) * y


def check_gradient_related(g, d, c1, c2, inner=None):
    """<g, d> <= -c1 ||g||^2 and ||d|| <= c2 ||g||."""
    dot = inner or _dot
    gg = dot(g, g)
    return bool(dot(g, d) <= -c1 * gg and math.sqrt(dot(d, d)) <= c2 * math.sqrt(gg))


def _dot(a, b):
    return float(np.vdot(a, b))


# directions ------------------------------------------------------------------------


def _transported_pair(man, state, counters):
    s = man.transport(state.prev_x, state.x, state.prev_eta * state.prev_d)
    y = state.g - man.transport(state.prev_x, state.x, state.prev_g)
    if counters is not None:
        counters.transports += 2
    return s, y


def rgmm_direction(problem, state, config, counters=None):
    man = problem.manifold
    g = state.g
    if state.k == 0 or not config.momentum:
        return DirectionDiagnostics(FIRST_ITER, -config.lambda0 * g, lam=config.lambda0)
    x = state.x
    dot = lambda a, b: man.inner(x, a, b)  # noqa: E731
    s, y = _transported_pair(man, state, counters)
    sy = dot(s, y)
    if sy <= 0:
        return DirectionDiagnostics(CURVATURE, -config.lambda_max * g, s, y, sy,
                                    lam=config.lambda_max)
    lam = lambda_bb(s, y, config.strategy, state.k, config.lambda_min,
                    config.lambda_max, dot)
    try:
        alpha, beta, d = momentum_direction(g, s, y, lam, dot)
    except DegenerateDirection:
        return DirectionDiagnostics(DEGENERATE, -lam * g, s, y, sy, lam)
    gg = dot(g, g)
    gy = dot(g, y)
    rho = (gg - dot(g, s) ** 2 / dot(s, s)) / lam + gy * gy / sy
    ok = check_gradient_related(g, d, config.c1, config.c2, dot)
    if not ok:
        return DirectionDiagnostics(GRAD_RELATED, -lam * g, s, y, sy, lam, alpha,
                                    beta, rho, False)
    return DirectionDiagnostics(MOMENTUM, d, s, y, sy, lam, alpha, beta, rho, True)


def rbb_direction(problem, state, config, counters=None):
    man = problem.manifold
    g = state.g
    if state.k == 0:
        return DirectionDiagnostics(FIRST_ITER, -config.lambda0 * g, lam=config.lambda0)
    dot = lambda a, b: man.inner(state.x, a, b)  # noqa: E731
    s, y = _transported_pair(man, state, counters)
    sy = dot(s, y)
    if sy <= 0:
        return DirectionDiagnostics(CURVATURE, -config.lambda_max * g, s, y, sy,
                                    lam=config.lambda_max)
    lam = lambda_bb(s, y, config.strategy, state.k, config.lambda_min,
                    config.lambda_max, dot)
    return DirectionDiagnostics(BB, -lam * g, s, y, sy, lam)


def rgd_direction(problem, state, config, counters=None):
    return DirectionDiagnostics(GRADIENT, -state.g, lam=1.0)


DIRECTIONS = {"rgmm": rgmm_direction, "rgd": rgd_direction, "rbb": rbb_direction}


# iteration -----------------------------------------------------------------------------


@dataclass
class StepStats:
    eta0: float
    eta: float
    backtracks: int
    accepted: bool
    gd: float
    dnorm: float


def initial_step(config, state, dnorm):
    if not config.safeguard_eta or state.prev_d is None:
        return 1.0
    prev = state.prev_eta * float(np.linalg.norm(state.prev_d))
    if dnorm > config.safeguard_ratio * prev:
        return min(1.0, config.safeguard_factor * prev / dnorm)
    return 1.0


def take_step(problem, state, config, rule="rgmm", counters=None):
    """One iteration of the chosen rule from ``state``.

    Returns (new_state, diagnostics, stats). When the line search fails on
    the minimum step size the returned state is ``state`` itself.
    """
    man = problem.manifold
    diag = DIRECTIONS[rule](problem, state, config, counters)
    d = diag.d
    dnorm = man.norm(state.x, d)
    eta0 = initial_step(config, state, dnorm)
    ls = armijo(problem, state.x, state.f, state.g, d, eta0, config.gamma,
                config.delta, config.min_step_size, counters)
    stats = StepStats(eta0, ls.eta, ls.backtracks, ls.accepted,
                      man.inner(state.x, state.g, d), dnorm)
    if not ls.accepted:
        return state, diag, stats
    g_new = riemannian_gradient(problem, ls.x_new, counters)
    new = IterState(ls.x_new, ls.f_new, g_new, state.k + 1, state.x, d, ls.eta, state.g)
    return new, diag, stats


def rgmm_step(problem, state, config, counters=None):
    return take_step(problem, state, config, "rgmm", counters)


def solve(problem, x0, config=None, rule="rgmm", callback=None):
    """Run ``rule`` from ``x0`` until ||grad f|| <= epsilon or a budget runs out."""
    if rule not in DIRECTIONS:
        raise ContractError(f"unknown rule {rule!r}; choose from {RULES}")
    config = config or SolverConfig()
    man = problem.manifold
    x0 = man.validate_point(x0)
    counters = Counters()
    start = time.perf_counter()

    f0 = problem.cost(x0)
    counters.function_evals += 1
    g0 = riemannian_gradient(problem, x0, counters)
    gnorm0 = man.norm(x0, g0)
    eps = config.epsilon if config.epsilon is not None else config.tol_rel * gnorm0
    state = IterState(x0, f0, g0)
    gnorm = gnorm0
    trace = []
    termination = GRADIENT_TOLERANCE

    while gnorm > eps:
        if state.k >= config.max_iter:
            termination = MAX_ITER
            break
        if time.perf_counter() - start >= config.max_time_seconds:
            termination = MAX_TIME
            break
        new, diag, stats = take_step(problem, state, config, rule, counters)
        if not stats.accepted:
            termination = MIN_STEP
            break
        trace.append(IterationLog(state.k, state.f, gnorm, stats.gd, stats.dnorm,
                                  stats.eta0, stats.eta, stats.backtracks, new.f,
                                  diag.branch))
        if callback is not None:
            callback(state, diag, stats)
        state = new
        gnorm = man.norm(state.x, state.g)

    return RunRecord(
        rule=rule,
        iterations=state.k,
        function_evals=counters.function_evals,
        gradient_evals=counters.gradient_evals,
        retraction_count=counters.retractions,
        transport_count=counters.transports,
        wall_time=time.perf_counter() - start,
        termination=termination,
        final_point=state.x,
        final_f=state.f,
        final_gnorm=gnorm,
        f0=f0,
        gnorm0=gnorm0,
        epsilon=eps,
        trace=trace,
    )


# audits -------------------------------------------------------------------------------------


def empirical_constants(trace):
    """Tightest (c1, c2) the run's directions satisfy."""
    c1 = min(-it.gd / it.gnorm**2 for it in trace)
    c2 = max(it.dnorm / it.gnorm for it in trace)
    return c1, c2


@dataclass
class Lemma1Report:
    lipschitz: float
    c1_eff: float
    c2_eff: float
    bound: Optional[int]
    checked: int
    violations: list

    @property
    def ok(self):
        return not self.violations


def backtrack_bound(lipschitz, gamma, delta, c1, c2):
    """Worst-case number of Armijo reductions when every search starts at 1."""
    threshold = 2.0 * (1.0 - gamma) * c1 / c2**2
    if lipschitz <= threshold:
        return 0
    return math.floor(math.log(threshold / lipschitz) / math.log(delta)) + 1


def lemma1_audit(trace, lipschitz, config):
    """Compare observed backtracks with the worst-case bound.

    The bound uses the run's empirical gradient-related constants and is
    only applied to iterations whose line search started from eta = 1.
    """
    if not trace:
        return Lemma1Report(lipschitz, float("nan"), float("nan"), None, 0, [])
    c1, c2 = empirical_constants(trace)
    bound = backtrack_bound(lipschitz, config.gamma, config.delta, c1, c2)
    checked = [it for it in trace if it.eta0 == 1.0]
    violations = [(it.k, it.backtracks) for it in checked if it.backtracks > bound]
    return Lemma1Report(lipschitz, c1, c2, bound, len(checked), violations)


@dataclass
class ComplexityReport:
    grad_sq_sum: float
    decrease_bound: float
    iterations: int
    epsilon: float
    sum_ok: bool
    count_ok: bool

    @property
    def ok(self):
        return self.sum_ok and self.count_ok


def complexity_audit(trace, f_low, config, epsilon=None, f0=None):
    """Check the worst-case complexity chain with empirical constants.

    sum_k ||g_k||^2 <= (f(x0) - f_low) / (gamma c1_eff min_k eta_k) and
    k_eps * eps^2 <= sum_k ||g_k||^2 over the iterations run.
    """
    eps = config.epsilon if epsilon is None else epsilon
    if not trace:
        return ComplexityReport(0.0, 0.0, 0, eps, True, True)
    f0 = trace[0].f if f0 is None else f0
    c1, _ = empirical_constants(trace)
    eta_min = min(it.eta for it in trace)
    total = sum(it.gnorm**2 for it in trace)
    bound = (f0 - f_low) / (config.gamma * c1 * eta_min)
    # round-off slack only; both sides are sums of positive terms
    slack = 1e-12 * max(abs(total), abs(bound))
    return ComplexityReport(
        grad_sq_sum=total,
        decrease_bound=bound,
        iterations=len(trace),
        epsilon=eps,
        sum_ok=total <= bound + slack,
        count_ok=len(trace) * eps**2 <= total,
    )


def check_trace(trace, config):
    """Per-iteration sufficient decrease and gradient-relatedness failures."""
    bad_decrease = []
    bad_related = []
    for it in trace:
        if not (it.f_next <= it.f + config.gamma * it.eta * it.gd and it.f_next < it.f):
            bad_decrease.append(it.k)
        if not (it.gd <= -config.c1 * it.gnorm**2 and it.dnorm <= config.c2 * it.gnorm):
            bad_related.append(it.k)
    return bad_decrease, bad_related


def evaluation_identities(record):
    """Counting identities that hold for a run with no failed final search."""
    trials = sum(it.backtracks + 1 for it in record.trace)
    return {
        "gradient_evals": record.gradient_evals == record.iterations + 1,
        "function_evals": record.function_evals == 1 + trials,
        "retractions": record.retraction_count == trials,
    }
