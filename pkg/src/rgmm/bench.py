"""Batch runs over (instance, seed, solver) and Dolan-More performance profiles.

All solvers of an instance start from the same x0, drawn from the manifold
with the run's seed; the problem data depend only on ``data_seed``. A run
fails when it stops for any reason other than the gradient tolerance, and
a failed run costs ``inf`` in every profile metric.

Suite files are flat ``key = value`` text, ``#`` starts a comment::

    solvers = rgmm, rbb, rgd
    seeds = 10                    # seeds 0..9; or an explicit list: 3, 5, 8
    problem = dis n=128 p=3       # repeatable
    problem = tsvd n=60 m=42 p=5
    gamma = 1e-4                  # any SolverConfig field, for every solver
    rbb.strategy = alternate      # per-solver override

Record CSV columns: instance, solver, seed, iterations, fevals, gevals,
retractions, wall_time_s, termination. Profile CSV: ``# key: value``
metadata lines followed by a ``tau,<solver>...`` table of pi values.
"""

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from fractions import Fraction
from xml.sax.saxutils import escape

import numpy as np

from . import problems
from .geometry import ContractError
from .solver import CURVATURE, GRAD_RELATED, RULES, SolverConfig, solve

METRICS = {
    "time": "wall_time_s",
    "iterations": "iterations",
    "function_evals": "fevals",
    "gradient_evals": "gevals",
}
CSV_COLUMNS = ("instance", "solver", "seed", "iterations", "fevals", "gevals",
               "retractions", "wall_time_s", "termination")


@dataclass(frozen=True)
class InstanceSpec:
    problem: str
    size: tuple = ()
    seed: int = 0
    solvers: tuple = RULES
    overrides: tuple = ()
    data_seed: int = 0

    @property
    def instance_id(self):
        args = ",".join(f"{k}={v}" for k, v in self.size)
        return f"{self.problem}({args})"

    def config_for(self, solver, base=None):
        cfg = base or SolverConfig()
        changes = {k: v for s, k, v in self.overrides if s is None}
        changes.update({k: v for s, k, v in self.overrides if s == solver})
        return cfg.replace(**changes) if changes else cfg


@dataclass
class SuiteRecord:
    instance: str
    solver: str
    seed: int
    iterations: int
    fevals: int
    gevals: int
    retractions: int
    wall_time_s: float
    termination: str
    branch_counts: dict = field(default_factory=dict, compare=False)

    @property
    def success(self):
        return self.termination == "gradient_tolerance"

    def row(self):
        return [self.instance, self.solver, self.seed, self.iterations, self.fevals,
                self.gevals, self.retractions, repr(float(self.wall_time_s)),
                self.termination]


def make_specs(problem_sizes, seeds, solvers=RULES, overrides=(), data_seed=0):
    """Cartesian product of problems and seeds as InstanceSpecs.

    ``problem_sizes`` is a list of ``(name, {size...})`` pairs.
    """
    return [
        InstanceSpec(name, tuple(sorted(size.items())), seed, tuple(solvers),
                     tuple(overrides), data_seed)
        for name, size in problem_sizes
        for seed in seeds
    ]


def _run_instance(spec):
    try:
        problem = problems.build(spec.problem, seed=spec.data_seed, **dict(spec.size))
    except Exception as exc:  # one bad instance must not sink the suite
        return [SuiteRecord(spec.instance_id, s, spec.seed, 0, 0, 0, 0, math.inf,
                            f"error: {type(exc).__name__}") for s in spec.solvers]
    x0 = problem.manifold.random_point(spec.seed)
    out = []
    for solver in spec.solvers:
        rec = solve(problem, x0, spec.config_for(solver), rule=solver)
        branches = {}
        for it in rec.trace:
            branches[it.branch] = branches.get(it.branch, 0) + 1
        out.append(SuiteRecord(spec.instance_id, solver, spec.seed, rec.iterations,
                               rec.function_evals, rec.gradient_evals,
                               rec.retraction_count, rec.wall_time, rec.termination,
                               branches))
    return out


def _key(r):
    return (r.instance, r.solver, r.seed)


def run_suite(specs, jobs=1):
    """Run every spec; the result is sorted by (instance, solver, seed)."""
    if jobs <= 1:
        batches = [_run_instance(s) for s in specs]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(_run_instance, specs))
    return sorted((r for b in batches for r in b), key=_key)


def safeguard_rates(records, solver="rgmm"):
    """Share of iterations that hit each fallback branch for ``solver``."""
    counts = {}
    total = 0
    for r in records:
        if r.solver != solver:
            continue
        total += sum(r.branch_counts.values())
        for b, c in r.branch_counts.items():
            counts[b] = counts.get(b, 0) + c
    def rate(b):
        return counts.get(b, 0) / total if total else 0.0
    return {
        "iterations": total,
        "curvature_fallback": rate(CURVATURE),
        "gradient_related_fallback": rate(GRAD_RELATED),
        "branches": counts,
    }


# CSV ---------------------------------------------------------------------------


def write_records_csv(records, path):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in sorted(records, key=_key):
                w.writerow(r.row())
    except OSError as exc:
        raise OSError(f"cannot write records to {path}: {exc}") from exc


def read_records_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise OSError(f"cannot read records from {path}: {exc}") from exc
    return [
        SuiteRecord(r["instance"], r["solver"], int(r["seed"]), int(r["iterations"]),
                    int(r["fevals"]), int(r["gevals"]), int(r["retractions"]),
                    float(r["wall_time_s"]), r["termination"])
        for r in rows
    ]


# performance profiles ---------------------------------------------------------------


def default_tau_grid():
    return np.geomspace(1.0, 100.0, 200)


@dataclass
class ProfileTable:
    """pi_S(tau) stored exactly as counts over ``n_instances``."""

    metric: str
    tau: np.ndarray
    counts: dict
    n_instances: int
    failures: dict

    @property
    def solvers(self):
        return list(self.counts)

    def pi(self, solver):
        return np.asarray(self.counts[solver], dtype=float) / self.n_instances

    def __eq__(self, other):
        if not isinstance(other, ProfileTable):
            return NotImplemented
        return (self.metric == other.metric
                and self.n_instances == other.n_instances
                and self.failures == other.failures
                and list(self.counts) == list(other.counts)
                and np.array_equal(self.tau, other.tau)
                and all(np.array_equal(self.counts[s], other.counts[s]) for s in self.counts))


def _ratio(t, best):
    if math.isinf(t):
        return None
    if best == 0:
        return Fraction(1) if t == 0 else None
    return Fraction(t) / Fraction(best)


def performance_profile(records, metric="time", tau_grid=None):
    """Dolan-More profile over (instance, seed) pairs.

    Ratios are compared in exact rational arithmetic, so tied solvers all
    get ratio 1. A cost of zero only ties with another zero; a positive
    cost against a best of zero never counts.
    """
    if not records:
        raise ContractError("performance_profile needs at least one record")
    column = METRICS.get(metric, metric)
    if column not in METRICS.values():
        raise ContractError(f"unknown metric {metric!r}; choose from {sorted(METRICS)}")
    tau = default_tau_grid() if tau_grid is None else np.asarray(tau_grid, dtype=float)
    solvers = sorted({r.solver for r in records})
    cost = {}
    for r in records:
        cost[(r.instance, r.seed), r.solver] = (
            float(getattr(r, column)) if r.success else math.inf
        )
    problems_ = sorted({(r.instance, r.seed) for r in records})
    missing = [(p, s) for p in problems_ for s in solvers if (p, s) not in cost]
    if missing:
        raise ContractError(f"missing records for {missing[:3]}")
    ratios = {s: [] for s in solvers}
    for p in problems_:
        best = min(cost[p, s] for s in solvers)
        for s in solvers:
            ratios[s].append(None if math.isinf(best) else _ratio(cost[p, s], best))
    taus = [Fraction(float(t)) for t in tau]
    counts = {}
    for s in solvers:
        finite = sorted(r for r in ratios[s] if r is not None)
        counts[s] = np.array([_count_le(finite, t) for t in taus], dtype=int)
    failures = {s: sum(1 for p in problems_ if math.isinf(cost[p, s])) for s in solvers}
    return ProfileTable(metric, tau, counts, len(problems_), failures)


def _count_le(sorted_vals, t):
    lo, hi = 0, len(sorted_vals)
    while lo < hi:
        mid = (lo + hi) // 2
        if sorted_vals[mid] <= t:
            lo = mid + 1
        else:
            hi = mid
    return lo


def write_profile_csv(table, path):
    fail = ";".join(f"{s}={n}" for s, n in table.failures.items())
    try:
        with open(path, "w", newline="") as fh:
            fh.write(f"# metric: {table.metric}\n")
            fh.write(f"# instances: {table.n_instances}\n")
            fh.write(f"# failures: {fail}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tau", *table.solvers])
            for i, t in enumerate(table.tau):
                w.writerow([repr(float(t))] + [repr(float(table.pi(s)[i])) for s in table.solvers])
    except OSError as exc:
        raise OSError(f"cannot write profile to {path}: {exc}") from exc


def read_profile_csv(path):
    meta = {}
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for ln in lines:
        if ln.startswith("#"):
            key, _, value = ln[1:].partition(":")
            meta[key.strip()] = value.strip()
        elif ln:
            body.append(ln)
    rows = list(csv.reader(body))
    solvers = rows[0][1:]
    n = int(meta["instances"])
    data = np.array([[float(v) for v in row] for row in rows[1:]]).reshape(-1, len(solvers) + 1)
    counts = {s: np.rint(data[:, i + 1] * n).astype(int) for i, s in enumerate(solvers)}
    failures = {}
    if meta.get("failures"):
        for item in meta["failures"].split(";"):
            s, _, v = item.partition("=")
            failures[s] = int(v)
    return ProfileTable(meta["metric"], data[:, 0], counts, n, failures)


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def profile_svg(table, width=640, height=400):
    """Step plot of pi_S(tau) on a log tau axis, as an SVG document string."""
    left, right, top, bottom = 60, 130, 20, 50
    pw, ph = width - left - right, height - top - bottom
    tmin, tmax = float(table.tau[0]), float(table.tau[-1])
    span = math.log10(tmax / tmin) if tmax > tmin else 1.0

    def px(t):
        return left + pw * math.log10(t / tmin) / span

    def py(v):
        return top + ph * (1.0 - v)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<title>performance profile ({escape(table.metric)})</title>",
        f'<g class="axes" stroke="black" fill="none">'
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}"/>'
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}"/></g>',
    ]
    for e in range(int(math.floor(math.log10(tmin))), int(math.ceil(math.log10(tmax))) + 1):
        t = 10.0**e
        if tmin <= t <= tmax:
            out.append(f'<text class="xtick" x="{px(t):.2f}" y="{top + ph + 16}" '
                       f'text-anchor="middle">{t:g}</text>')
    for v in (0.0, 0.5, 1.0):
        out.append(f'<text class="ytick" x="{left - 6}" y="{py(v) + 4:.2f}" '
                   f'text-anchor="end">{v:g}</text>')
    out.append(f'<text class="xlabel" x="{left + pw / 2}" y="{height - 10}" '
               f'text-anchor="middle">tau</text>')
    out.append(f'<text class="ylabel" x="14" y="{top + ph / 2}" '
               f'transform="rotate(-90 14 {top + ph / 2})" text-anchor="middle">'
               f'pi(tau)</text>')
    for i, s in enumerate(table.solvers):
        color = _COLORS[i % len(_COLORS)]
        pi = table.pi(s)
        pts = []
        for j, t in enumerate(table.tau):
            if j:
                pts.append((px(t), py(pi[j - 1])))
            pts.append((px(t), py(pi[j])))
        coords = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
        out.append(f'<polyline class="profile" data-solver="{escape(s)}" fill="none" '
                   f'stroke="{color}" stroke-width="2" points="{coords}"/>')
        ly = top + 20 * (i + 1)
        out.append(f'<g class="legend"><line x1="{left + pw + 10}" y1="{ly}" '
                   f'x2="{left + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>'
                   f'<text x="{left + pw + 35}" y="{ly + 4}">{escape(s)}</text></g>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_profile_svg(table, path):
    try:
        with open(path, "w") as fh:
            fh.write(profile_svg(table))
    except OSError as exc:
        raise OSError(f"cannot write SVG to {path}: {exc}") from exc


# suite files -------------------------------------------------------------------------


def parse_kv_lines(lines, source="<config>"):
    """Yield (key, value) pairs from ``key = value`` lines."""
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ContractError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        yield key.strip(), value.strip()


_CONFIG_FIELDS = {f.name: f.type for f in fields(SolverConfig)}
_ALIASES = {"max_time": "max_time_seconds", "min_step": "min_step_size",
            "tol_rel": "tol_rel"}


def coerce_config_value(key, value):
    key = _ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
    if key not in _CONFIG_FIELDS:
        raise ContractError(f"unknown solver parameter {key!r}")
    default = getattr(SolverConfig(), key)
    if isinstance(default, bool):
        low = str(value).lower()
        if low not in ("on", "off", "true", "false", "1", "0", "yes", "no"):
            raise ContractError(f"{key}: expected on/off, got {value!r}")
        return key, low in ("on", "true", "1", "yes")
    if key == "strategy":
        return key, str(value)
    if isinstance(default, int):
        return key, int(float(value))
    return key, float(value)


def _parse_problem(value):
    name, *args = value.split()
    size = {}
    for a in args:
        k, sep, v = a.partition("=")
        if not sep:
            raise ContractError(f"bad size argument {a!r} in problem {value!r}")
        size[k] = int(v)
    return name, size


@dataclass
class Suite:
    problems: list
    seeds: list
    solvers: tuple
    overrides: tuple
    data_seed: int = 0

    def specs(self):
        return make_specs(self.problems, self.seeds, self.solvers, self.overrides,
                          self.data_seed)


def parse_suite(text, source="<suite>"):
    problems_, seeds, solvers, overrides = [], list(range(10)), RULES, []
    data_seed = 0
    for key, value in parse_kv_lines(text.splitlines(), source):
        if key == "problem":
            problems_.append(_parse_problem(value))
        elif key == "solvers":
            solvers = tuple(s.strip() for s in value.split(",") if s.strip())
            bad = [s for s in solvers if s not in RULES]
            if bad:
                raise ContractError(f"{source}: unknown solvers {bad}")
        elif key == "seeds":
            items = [int(v) for v in value.split(",") if v.strip()]
            seeds = list(range(items[0])) if len(items) == 1 else items
        elif key == "data_seed":
            data_seed = int(value)
        elif "." in key:
            solver, _, param = key.partition(".")
            overrides.append((solver, *coerce_config_value(param, value)))
        else:
            overrides.append((None, *coerce_config_value(key, value)))
    if not problems_:
        raise ContractError(f"{source}: no 'problem' entries")
    return Suite(problems_, seeds, solvers, tuple(overrides), data_seed)


def load_suite(path):
    with open(path) as fh:
        return parse_suite(fh.read(), str(path))


# desk suite: two small sizes of each problem family
DESK_SUITE = [
    ("dis", {"n": 128, "p": 3}),
    ("dis", {"n": 500, "p": 3}),
    ("tsvd", {"n": 60, "m": 42, "p": 5}),
    ("tsvd", {"n": 100, "m": 60, "p": 7}),
    ("maxcut", {"n": 20, "p": 2}),
    ("maxcut", {"n": 100, "p": 2}),
    ("procrustes", {"n": 100, "p": 10}),
    ("procrustes", {"n": 500, "p": 15}),
]


def default_out_dir():
    return os.environ.get("RGMM_OUT_DIR", ".")
