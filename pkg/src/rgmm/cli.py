"""Command-line front end: ``rgmm {solve,bench,profile,audit,check}``.

Solver parameters come from built-in defaults, then from ``--config FILE``
(``key = value`` lines), then from explicit flags. Output files go to
``--out`` or, when that is omitted, to ``$RGMM_OUT_DIR`` (default: the
current directory).

Exit codes: 0 success, 1 a solve stopped without reaching the gradient
tolerance, 2 usage or configuration error.
"""

import argparse
import csv
import os
import sys
from dataclasses import asdict

import numpy as np

from . import bench, problems
from .geometry import ContractError
from .solver import RULES, STRATEGIES, SolverConfig, complexity_audit, lemma1_audit, solve

_FLAG_PARAMS = {
    "gamma": "gamma",
    "delta": "delta",
    "c1": "c1",
    "c2": "c2",
    "lambda_min": "lambda_min",
    "lambda_max": "lambda_max",
    "lambda0": "lambda0",
    "strategy": "strategy",
    "tol_rel": "tol_rel",
    "max_iter": "max_iter",
    "max_time": "max_time_seconds",
    "min_step": "min_step_size",
    "safeguard_eta": "safeguard_eta",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _add_config_flags(p):
    g = p.add_argument_group("solver parameters")
    g.add_argument("--config", help="key = value file with solver parameters")
    g.add_argument("--gamma", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--c1", type=float)
    g.add_argument("--c2", type=float)
    g.add_argument("--lambda-min", type=float)
    g.add_argument("--lambda-max", type=float)
    g.add_argument("--lambda0", type=float)
    g.add_argument("--strategy", choices=STRATEGIES)
    g.add_argument("--tol-rel", type=float, help="relative gradient tolerance (1e-6)")
    g.add_argument("--max-iter", type=int, help="iteration budget (50000)")
    g.add_argument("--max-time", type=float, help="time budget in seconds (600)")
    g.add_argument("--min-step", type=float, help="minimum step length (1e-10)")
    g.add_argument("--safeguard-eta", choices=("on", "off"))


def _add_problem_flags(p):
    p.add_argument("--problem", default="rayleigh", choices=problems.BUILDERS)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--p", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--data", help="matrix file ('rows cols' header) used as A or L")
    p.add_argument("--data-seed", type=int, default=0)


def build_parser():
    parser = _Parser(prog="rgmm", description="Riemannian gradient method with momentum: "
                     "solves, benchmarks, performance profiles and audits.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one problem instance")
    _add_problem_flags(p)
    p.add_argument("--solver", default="rgmm", choices=RULES)
    p.add_argument("--seed", type=int, default=0, help="seed of the initial point")
    p.add_argument("--out", help="write the per-iteration trace as CSV")
    _add_config_flags(p)

    p = sub.add_parser("bench", help="run a suite and emit records and profiles")
    p.add_argument("--suite", help="suite file; default is the desk-scale suite")
    p.add_argument("--problem", choices=problems.BUILDERS,
                   help="restrict the suite to one problem family")
    p.add_argument("--seeds", type=int, help="number of seeds (overrides the suite)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="output directory")
    _add_config_flags(p)

    p = sub.add_parser("profile", help="performance profile from a records CSV")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--metric", default="time", choices=sorted(bench.METRICS))
    p.add_argument("--out", help=".svg or .csv output path")

    p = sub.add_parser("audit", help="solve, then audit backtracks and complexity")
    _add_problem_flags(p)
    p.add_argument("--solver", default="rgmm", choices=RULES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=1)
    _add_config_flags(p)

    p = sub.add_parser("check", help="show defaults and run quick self-checks")
    p.add_argument("--show-config", action="store_true")
    _add_config_flags(p)
    return parser


def resolve_config(args):
    values = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            for key, value in bench.parse_kv_lines(fh, args.config):
                k, v = bench.coerce_config_value(key, value)
                values[k] = v
    for flag, field in _FLAG_PARAMS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[field] = (v == "on") if field == "safeguard_eta" else v
    return SolverConfig(**values)


def _build_problem(args):
    size = {"n": args.n, "p": args.p, "m": args.m}
    if not args.data:
        return problems.build(args.problem, seed=args.data_seed, **size)
    a = problems.read_matrix(args.data)
    if args.problem == "rayleigh":
        return problems.rayleigh(a)
    if args.problem == "dis":
        return problems.dominant_invariant_subspace(a, args.p or 3)
    if args.problem == "tsvd":
        return problems.truncated_svd(a, args.p or 1)
    if args.problem == "maxcut":
        return problems.maxcut_elliptope(a, args.p or 2)
    raise ContractError("--data is not supported for procrustes")


def _cmd_solve(args, out):
    config = resolve_config(args)
    problem = _build_problem(args)
    x0 = problem.manifold.random_point(args.seed)
    rec = solve(problem, x0, config, rule=args.solver)
    print(f"problem      {problem.name}", file=out)
    print(f"solver       {args.solver}", file=out)
    print(f"termination  {rec.termination}", file=out)
    print(f"iterations   {rec.iterations}", file=out)
    print(f"f            {rec.final_f:.12g}", file=out)
    print(f"|grad f|     {rec.final_gnorm:.3e} (tolerance {rec.epsilon:.3e})", file=out)
    print(f"evaluations  f={rec.function_evals} grad={rec.gradient_evals} "
          f"retr={rec.retraction_count}", file=out)
    if problem.optimum is not None and problem.optimum.exact:
        print(f"oracle f     {problem.optimum.value:.12g}", file=out)
    if args.out:
        _write_trace(rec, args.out)
    return 0 if rec.success else 1


def _write_trace(rec, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "f", "gnorm", "eta0", "eta", "backtracks", "branch"])
        for it in rec.trace:
            w.writerow([it.k, repr(it.f), repr(it.gnorm), repr(it.eta0), repr(it.eta),
                        it.backtracks, it.branch])


def _cmd_bench(args, out):
    config = resolve_config(args)
    if args.suite:
        suite = bench.load_suite(args.suite)
    else:
        suite = bench.Suite(list(bench.DESK_SUITE), list(range(10)), RULES, ())
    if args.problem:
        suite.problems = [ps for ps in suite.problems if ps[0] == args.problem]
    if args.seeds is not None:
        suite.seeds = list(range(args.seeds))
    # command-line parameters apply on top of the suite's global settings
    base = tuple((None, k, v) for k, v in asdict(config).items()
                 if v != getattr(SolverConfig(), k))
    suite.overrides = tuple(o for o in suite.overrides if o[0] is None) + base + tuple(
        o for o in suite.overrides if o[0] is not None)
    records = bench.run_suite(suite.specs(), jobs=args.jobs)
    outdir = args.out or bench.default_out_dir()
    os.makedirs(outdir, exist_ok=True)
    bench.write_records_csv(records, os.path.join(outdir, "records.csv"))
    print(f"{len(records)} runs -> {os.path.join(outdir, 'records.csv')}", file=out)
    for metric in bench.METRICS:
        table = bench.performance_profile(records, metric)
        bench.write_profile_csv(table, os.path.join(outdir, f"profile_{metric}.csv"))
        bench.write_profile_svg(table, os.path.join(outdir, f"profile_{metric}.svg"))
        summary = "  ".join(
            f"{s}: pi(1)={table.pi(s)[0]:.3f} pi(max)={table.pi(s)[-1]:.3f} "
            f"fail={table.failures[s]}" for s in table.solvers)
        print(f"[{metric}] {summary}", file=out)
    if "rgmm" in suite.solvers:
        rates = bench.safeguard_rates(records)
        print(f"rgmm safeguards over {rates['iterations']} iterations: "
              f"<s,y> <= 0 in {100 * rates['curvature_fallback']:.3f}%, "
              f"gradient-related test failed in "
              f"{100 * rates['gradient_related_fallback']:.3f}%", file=out)
    return 0


def _cmd_profile(args, out):
    records = bench.read_records_csv(args.inp)
    table = bench.performance_profile(records, args.metric)
    for s in table.solvers:
        print(f"{s}: pi(1)={table.pi(s)[0]:.6g} pi({table.tau[-1]:g})="
              f"{table.pi(s)[-1]:.6g} failures={table.failures[s]}", file=out)
    if args.out:
        if args.out.endswith(".csv"):
            bench.write_profile_csv(table, args.out)
        else:
            bench.write_profile_svg(table, args.out)
    return 0


def _cmd_audit(args, out):
    config = resolve_config(args)
    problem = _build_problem(args)
    lip = problems.estimate_lipschitz(problem, seed=args.seed,
                                      steps=np.logspace(0, -4, 9))
    print(f"problem {problem.name}; Taylor-estimated L = {lip:.6g}", file=out)
    status = 0
    for seed in range(args.seed, args.seed + args.seeds):
        rec = solve(problem, problem.manifold.random_point(seed), config, args.solver)
        lem = lemma1_audit(rec.trace, lip, config)
        line = (f"seed {seed}: {rec.termination}, {rec.iterations} it; backtrack bound "
                f"{lem.bound} on {lem.checked} it, violations {len(lem.violations)}")
        if problem.f_low is not None:
            comp = complexity_audit(rec.trace, problem.f_low, config, rec.epsilon, rec.f0)
            line += (f"; sum|g|^2={comp.grad_sq_sum:.3e} <= {comp.decrease_bound:.3e}: "
                     f"{comp.sum_ok}, count bound: {comp.count_ok}")
            status |= not comp.ok
        status |= not lem.ok
        print(line, file=out)
    return 1 if status else 0


def _cmd_check(args, out):
    config = resolve_config(args)
    if args.show_config:
        for k, v in asdict(config).items():
            print(f"{k} = {v}", file=out)
        return 0
    from .manifolds import MANIFOLDS
    sizes = {"sphere": (5,), "oblique": (3, 4), "stiefel": (6, 3), "grassmann": (6, 3)}
    ok = True
    for name, cls in MANIFOLDS.items():
        man = cls(*sizes[name])
        x = man.random_point(0)
        v = man.random_tangent(x, 1)
        w = np.random.default_rng(2).standard_normal(man.shape)
        pw = man.project(x, w)
        idem = np.linalg.norm(man.project(x, pw) - pw) / max(np.linalg.norm(pw), 1.0)
        retr = man.check_point(man.retract(x, v))
        good = idem < 1e-12 and retr < 1e-10 and man.check_tangent(x, v) < 1e-10
        ok &= good
        print(f"{man!r}: dim={man.dim} idempotence={idem:.1e} "
              f"retraction residual={retr:.1e} {'ok' if good else 'FAIL'}", file=out)
    return 0 if ok else 1


_COMMANDS = {"solve": _cmd_solve, "bench": _cmd_bench, "profile": _cmd_profile,
             "audit": _cmd_audit, "check": _cmd_check}


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args, out)
    except (ContractError, OSError, KeyError, ValueError) as exc:
        print(f"rgmm: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
