"""Acceptance criteria, one test each. Every test logs a PASS/FAIL/INFO line
that pytest prints in an "acceptance criteria" section at the end of the run."""

import csv
import math
import os
import time
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from rgmm import bench as B
from rgmm import problems as P
from rgmm import solver as S
from rgmm.geometry import spawn_seeds

from conftest import MANIFOLD_CASES

SVG = "{http://www.w3.org/2000/svg}"


# 1. geometry --------------------------------------------------------------------------------------------


def _geometry_trial(m, rng):
    x = m.random_point(rng)
    y = m.random_point(rng)
    w1, w2 = rng.standard_normal(m.shape), rng.standard_normal(m.shape)
    p1, p2 = m.project(x, w1), m.project(x, w2)
    idem = np.linalg.norm(m.project(x, p1) - p1) / np.linalg.norm(p1)
    adj = abs(np.vdot(p1, w2) - np.vdot(w1, p2)) / (np.linalg.norm(w1) * np.linalg.norm(w2))
    v = m.random_tangent(x, rng)
    ts = np.logspace(-2, -6, 5)
    res = [np.linalg.norm(m.retract(x, t * v) - (x + t * v)) for t in ts]
    slope = np.polyfit(np.log(ts), np.log(res), 1)[0]
    u = m.random_tangent(x, rng)
    a, b = rng.uniform(-10, 10, 2)
    lin = np.linalg.norm(m.transport(x, y, a * u + b * v)
                         - a * m.transport(x, y, u) - b * m.transport(x, y, v))
    lin /= abs(a) + abs(b)
    return idem, adj, slope, lin


def test_criterion_1_geometry(criterion):
    start = time.perf_counter()
    worst = {}
    for name, make in MANIFOLD_CASES.items():
        m = make()
        rows = np.array([_geometry_trial(m, np.random.default_rng(s))
                         for s in spawn_seeds(1, 100)])
        worst[name] = (rows[:, 0].max(), rows[:, 1].max(), rows[:, 2].min(), rows[:, 3].max())
    elapsed = time.perf_counter() - start
    ok = elapsed < 10 and all(i <= 1e-12 and a <= 1e-12 and s >= 1.9 and t <= 1e-12
                              for i, a, s, t in worst.values())
    detail = "; ".join(f"{n}: idem {i:.1e} adj {a:.1e} slope {s:.3f} transport {t:.1e}"
                       for n, (i, a, s, t) in worst.items())
    criterion("1 geometry suite (4 manifolds x 100 trials)", ok, f"{detail}; {elapsed:.2f}s")
    assert ok


# 2. operator -----------------------------------------------------------------------------------------------


def test_criterion_2_operator(criterion):
    names = sorted(MANIFOLD_CASES)
    mans = {n: MANIFOLD_CASES[n]() for n in names}
    worst_secant = worst_adj = worst_res = 0.0
    min_quad = math.inf
    start = time.perf_counter()
    for i, seed in enumerate(spawn_seeds(2, 1000)):
        rng = np.random.default_rng(seed)
        m = mans[names[i % len(names)]]
        x = m.random_point(rng)
        s, y, u, v, g = (m.random_tangent(x, rng) for _ in range(5))
        sy = np.vdot(s, y)
        if sy < 0:
            y, sy = -y, -sy
        lam = 10.0 ** rng.uniform(-3, 3)
        op = lambda z: S.bfgs_operator_apply(s, y, lam, z)
        bu, bv = op(u), op(v)
        scale = 1 / lam + np.vdot(y, y) / sy
        worst_secant = max(worst_secant, np.linalg.norm(op(s) - y) / np.linalg.norm(y))
        worst_adj = max(worst_adj, abs(np.vdot(u, bv) - np.vdot(bu, v)) / scale)
        min_quad = min(min_quad, np.vdot(u, bu) / np.vdot(u, u))
        alpha, beta, _ = S.momentum_direction(g, s, y, lam)
        bg, bs = op(g), op(s)
        h = np.array([[np.vdot(g, bg), -np.vdot(g, bs)], [-np.vdot(g, bs), np.vdot(s, bs)]])
        rhs = np.array([np.vdot(g, g), -np.vdot(g, s)])
        z = np.array([alpha, beta])
        res = np.linalg.norm(h @ z - rhs) / (np.linalg.norm(h, 2) * np.linalg.norm(z)
                                             + np.linalg.norm(rhs))
        worst_res = max(worst_res, res)
    elapsed = time.perf_counter() - start
    ok = (worst_secant <= 1e-12 and worst_adj <= 1e-12 and min_quad > 0
          and worst_res <= 1e-10 and elapsed < 5)
    criterion("2 operator suite (1000 triples)", ok,
              f"secant {worst_secant:.1e}, self-adjoint {worst_adj:.1e}, "
              f"min <u,Bu>/|u|^2 {min_quad:.2e}, 2x2 residual {worst_res:.1e}; {elapsed:.2f}s")
    assert ok


# 3 and 4. oracle convergence and framework guarantees ---------------------------------------------------------


ORACLE_SET = [
    ("rayleigh", {"n": 50}),
    ("rayleigh", {"n": 100}),
    ("dis", {"n": 128, "p": 3}),
    ("tsvd", {"n": 60, "m": 42, "p": 5}),
    ("procrustes", {"n": 100, "p": 10}),
]


@pytest.fixture(scope="module")
def oracle_runs():
    cfg = S.SolverConfig()
    start = time.perf_counter()
    runs = []
    for name, size in ORACLE_SET:
        pb = P.build(name, seed=0, **size)
        for seed in range(10):
            runs.append((pb, S.solve(pb, pb.manifold.random_point(seed), cfg)))
    return runs, time.perf_counter() - start, cfg


def test_criterion_3_oracle_convergence(criterion, oracle_runs):
    runs, elapsed, _ = oracle_runs
    worst = {}
    ok = elapsed < 60
    for pb, rec in runs:
        err = abs(rec.final_f - pb.optimum.value) / abs(pb.optimum.value)
        good = (rec.success and rec.final_gnorm <= 1e-6 * rec.gnorm0
                and rec.iterations <= 50_000 and err <= 1e-6)
        ok &= good
        w = worst.setdefault(pb.name, [0.0, 0, 0])
        w[0] = max(w[0], err)
        w[1] = max(w[1], rec.iterations)
        w[2] += good
    detail = "; ".join(f"{n}: {c}/10 ok, max rel err {e:.1e}, max it {k}"
                       for n, (e, k, c) in worst.items())
    criterion("3 oracle convergence (5 instances x 10 seeds)", ok,
              f"{detail}; {elapsed:.1f}s")
    assert ok


def test_criterion_4_framework_guarantees(criterion, oracle_runs):
    runs, _, cfg = oracle_runs
    failures = []
    for pb, rec in runs:
        bad_dec, bad_rel = S.check_trace(rec.trace, cfg)
        ids = S.evaluation_identities(rec)
        comp = S.complexity_audit(rec.trace, pb.f_low, cfg, rec.epsilon, rec.f0)
        if bad_dec or bad_rel or not all(ids.values()) or not comp.ok:
            failures.append((pb.name, bad_dec[:3], bad_rel[:3], ids, comp))
    iters = sum(rec.iterations for _, rec in runs)
    ok = not failures
    criterion("4 framework guarantees on criterion-3 runs", ok,
              f"{len(runs)} runs, {iters} iterations checked; {len(failures)} runs with failures")
    assert ok, failures[:3]


# 5. backtrack bound ---------------------------------------------------------------------------------------------


def test_criterion_5_backtrack_bound(criterion):
    pb = P.rayleigh(np.diag(np.linspace(1.0, 4.0, 10)))
    cfg = S.SolverConfig(safeguard_eta=False)
    lip = P.estimate_lipschitz(pb, seed=0, steps=np.logspace(0, -4, 9))
    checked = 0
    violations = 0
    bounds = set()
    for seed in range(10):
        rec = S.solve(pb, pb.manifold.random_point(seed), cfg)
        rep = S.lemma1_audit(rec.trace, lip, cfg)
        checked += rep.checked
        violations += len(rep.violations)
        bounds.add(rep.bound)
    ok = violations == 0 and checked > 0
    criterion("5 backtrack bound audit (10 seeds, safeguard off)", ok,
              f"L = {lip:.3f}, bounds {sorted(bounds)}, {checked} iterations checked, "
              f"{violations} violations")
    assert ok


# 6. safeguard branches --------------------------------------------------------------------------------------------------


def test_criterion_6_safeguard_branches(criterion):
    pb = P.rayleigh(np.diag([1.0, 2.0, 4.0, 7.0]))
    x = pb.manifold.random_point(0)
    g = S.riemannian_gradient(pb, x)
    state = S.IterState(x, pb.cost(x), g, 1)

    # <s, y> = 0: y = g - T(g_prev) vanishes when g_prev = g at the same point
    cfg = S.SolverConfig()
    state.prev_x, state.prev_d, state.prev_eta, state.prev_g = x, -g, 0.3, g
    _, d1, _ = S.rgmm_step(pb, state, cfg)
    curv_ok = d1.branch == S.CURVATURE and np.array_equal(d1.d, -cfg.lambda_max * g)

    # <s, y> < 0: s = 0.3 w and y = -2 w
    w = pb.manifold.random_tangent(x, 4)
    state.prev_d, state.prev_g = w, g + 2.0 * w
    _, d2, _ = S.rgmm_step(pb, state, cfg)
    neg_ok = d2.sy < 0 and d2.branch == S.CURVATURE and np.array_equal(d2.d, -cfg.lambda_max * g)

    # c1 = c2 = 1 admits only d = -g; the momentum direction is excluded
    s_dir = pb.manifold.random_tangent(x, 5)
    state.prev_d, state.prev_eta, state.prev_g = s_dir, 1.0, g - 2.0 * s_dir
    tight = S.SolverConfig(c1=1.0, c2=1.0, lambda_min=1.0, lambda_max=1.0, lambda0=1.0)
    _, d3, _ = S.rgmm_step(pb, state, tight)
    mom = S.momentum_direction(g, d3.s, d3.y, d3.lam)[2]
    rel_ok = (d3.branch == S.GRAD_RELATED and not S.check_gradient_related(g, mom, 1.0, 1.0)
              and np.array_equal(d3.d, -d3.lam * g))

    ok = curv_ok and neg_ok and rel_ok
    criterion("6 safeguard branches", ok,
              f"<s,y>=0 -> {d1.branch}; <s,y>={d2.sy:.2e} -> {d2.branch}; "
              f"tight c1/c2 -> {d3.branch} with lambda_k = {d3.lam:g}")
    assert ok


# 7 and 8. profiles and the desk suite --------------------------------------------------------------------------------------


def _rec(instance, solver, t, ok=True):
    return B.SuiteRecord(instance, solver, 0, 1, 2, 2, 1, float(t),
                         "gradient_tolerance" if ok else "max_iter")


@pytest.fixture(scope="module")
def desk_suite(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk")
    start = time.perf_counter()
    records = B.run_suite(B.make_specs(B.DESK_SUITE, range(10)),
                          jobs=min(4, os.cpu_count() or 1))
    B.write_records_csv(records, out / "records.csv")
    table = B.performance_profile(records, "time")
    B.write_profile_csv(table, out / "profile_time.csv")
    B.write_profile_svg(table, out / "profile_time.svg")
    return records, table, out, time.perf_counter() - start


def _profile_properties(n_cases=300):
    rng = np.random.default_rng(7)
    for _ in range(n_cases):
        n = int(rng.integers(1, 10))
        records = []
        for i in range(n):
            for s in ("A", "B", "C"):
                records.append(_rec(f"P{i}", s, rng.uniform(0.01, 100), rng.random() < 0.7))
        table = B.performance_profile(records, "time")
        for s in table.solvers:
            pi = table.pi(s)
            succ = sum(r.success for r in records if r.solver == s) / n
            if np.any(np.diff(pi) < 0) or pi[0] < 0 or pi[-1] > succ + 1e-15:
                return False
        # a solver that fails everywhere scores zero
        dead = records + [_rec(f"P{i}", "Z", 1.0, False) for i in range(n)]
        if np.any(B.performance_profile(dead, "time").pi("Z") != 0):
            return False
    return True


def test_criterion_7_profiles(criterion, desk_suite):
    fixture = [_rec("P1", "S1", 1), _rec("P2", "S1", 4), _rec("P1", "S2", 2), _rec("P2", "S2", 2)]
    t = B.performance_profile(fixture, "time", [1.0, 2.0])
    exact = (t.pi("S1").tolist(), t.pi("S2").tolist()) == ([0.5, 1.0], [0.5, 1.0])
    props = _profile_properties()

    records, table, out, elapsed = desk_suite
    back = B.read_records_csv(out / "records.csv")
    with open(out / "records.csv") as fh:
        header = next(csv.reader(fh))
    csv_ok = header == list(B.CSV_COLUMNS) and len(back) == len(records) == 240
    csv_ok &= B.read_profile_csv(out / "profile_time.csv") == table
    root = ET.parse(out / "profile_time.svg").getroot()
    lines = root.findall(f"{SVG}polyline[@class='profile']")
    svg_ok = (root.tag == SVG + "svg"
              and [p.get("data-solver") for p in lines] == sorted(S.RULES)
              and len(root.findall(f"{SVG}g[@class='legend']")) == 3)
    ok = exact and props and csv_ok and svg_ok and elapsed < 300
    pis = ", ".join(f"{s} {table.pi(s)[0]:.2f}" for s in table.solvers)
    criterion("7 profile correctness and desk suite", ok,
              f"fixture exact {exact}, properties {props}, CSV {csv_ok}, SVG {svg_ok}; "
              f"{len(records)} runs in {elapsed:.1f}s; time pi(1): {pis}")
    assert ok


def test_criterion_8_safeguard_rates(criterion, desk_suite):
    records = desk_suite[0]
    rates = B.safeguard_rates(records, "rgmm")
    criterion("8 safeguard rates on the desk suite (reported)", None,
              f"{rates['iterations']} RGMM iterations: <s,y> <= 0 in "
              f"{100 * rates['curvature_fallback']:.3f}%, gradient-related fallback in "
              f"{100 * rates['gradient_related_fallback']:.3f}% "
              f"(reference: below 0.5% of iterations)")
    assert rates["iterations"] > 0
