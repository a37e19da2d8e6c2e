"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import dro, gp, harness
from .errors import ConsistencyError, DomainError, NumericalError, ResourceError
from .optimizers import METHODS

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _load_config(args) -> harness.ExperimentConfig:
    config = harness.ExperimentConfig.from_json(args.config) if args.config else harness.ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seeds"] = (args.seed,)
    if args.method:
        changes["methods"] = tuple(args.method)
    if args.epsilon is not None:
        changes["epsilon"] = args.epsilon
    if args.out is not None:
        changes["output"] = args.out
    return config.replace(**changes) if changes else config


def cmd_sweep(args):
    config = _load_config(args)
    out = Path(config.output)
    start = time.perf_counter()

    def progress(cell):
        print(f"  done {cell.method:<9} seed={cell.seed} problem={cell.problem_index}  "
              f"({time.perf_counter() - start:.0f}s)", file=sys.stderr)

    table, traces = harness.run_shift_sweep(config, jobs=args.jobs, out_dir=out, progress=progress)
    table.check(harness.shift_series(config, config.grid.build()))
    paths = harness.export_results(table, traces, config, out)
    print(harness.summarize(table))
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    return EXIT_OK


def cmd_landscape(args):
    config = _load_config(args)
    problem = harness.build_problems(config)[args.problem_index]
    scans = [harness.landscape_scan(problem, (args.steps, args.steps), xi) for xi in args.xi]
    for s in scans:
        g, b = s.argmin_theta
        print(f"xi={s.xi:g}  argmin cell={s.argmin}  gamma={g:.4f} beta={b:.4f}  min={s.values.min():.6f}")
    path = harness.write_landscape_json(scans, Path(config.output) / "landscape.json")
    print(f"landscape: {path}")
    return EXIT_OK


def cmd_inner_solver_check(args):
    rng = np.random.default_rng(0 if args.seed is None else args.seed)
    grid = dro.NoiseGrid.uniform(5, 0.0, 0.08)
    M = dro.mmd_kernel_matrix(grid)
    eps = 0.1 if args.epsilon is None else args.epsilon
    worst_gap = worst_infeas = 0.0
    for _ in range(args.instances):
        ball = dro.MmdBall(dro.DiscretePdf.normalized(rng.uniform(0.05, 1.0, 5)), eps, M)
        values = rng.normal(size=5)
        w = dro.worst_case_weights(values[None], ball)[0]
        grid_obj, _ = dro.grid_search_worst_case(values, ball, step=0.02)
        worst_gap = max(worst_gap, grid_obj - float(values @ w))
        worst_infeas = max(worst_infeas, ball.distance(w) - eps, abs(w.sum() - 1.0), -w.min())
    ok = worst_gap <= 1e-3 and worst_infeas <= 1e-9
    print(f"instances={args.instances} lattice_excess={worst_gap:.3e} infeasibility={worst_infeas:.3e} "
          f"{'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_gp_check(args):
    rng = np.random.default_rng(0 if args.seed is None else args.seed)
    worst = 0.0
    for n in (5, 50, 200):
        X, Xq = rng.uniform(size=(n, 3)), rng.uniform(size=(10, 3))
        y = np.sin(3 * X).sum(1) + 0.01 * rng.normal(size=n)
        model = gp.fit(X, y, gp.GpConfig(mode="fixed", lengthscale=0.3, noise=1e-2))
        mu, var = model.predict_raw_variance(Xq)
        z = (y - model.y_mean) / model.y_scale
        K = gp.kernel_matrix(X, X, 0.3) + (1e-4 + model.jitter) * np.eye(n)
        ks = gp.kernel_matrix(Xq, X, 0.3)
        mu_ref = model.y_mean + model.y_scale * ks @ np.linalg.solve(K, z)
        var_ref = 1.0 - np.einsum("ij,ji->i", ks, np.linalg.solve(K, ks.T))
        worst = max(worst, np.max(np.abs(mu - mu_ref)) / model.y_scale, np.max(np.abs(var - var_ref)))
    ok = worst <= 1e-8
    print(f"max deviation from dense solve={worst:.3e} {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_bench(args):
    config = _load_config(args)
    problem = harness.build_problems(config)[0]
    grid = config.grid.build()
    rng = np.random.default_rng(0 if args.seed is None else args.seed)
    lo, hi = problem.theta_bounds[:, 0], problem.theta_bounds[:, 1]

    def timed(label, fn, reps):
        fn()
        t0 = time.perf_counter()
        for _ in range(reps):
            fn()
        print(f"{label:<32} {1e3 * (time.perf_counter() - t0) / reps:9.3f} ms")

    theta = rng.uniform(lo, hi)
    timed(f"noisy objective ({problem.n_qubits} qubits)", lambda: problem.objective(theta, 0.02), 20)
    X, y = rng.uniform(size=(100, problem.theta_dim + 1)), rng.normal(size=100)
    timed("GP fit, 100 points (grid MLE)", lambda: gp.fit(X, y), 3)
    ref = dro.truncated_gaussian_pdf(config.reference.mean, config.reference.std, grid)
    ball = dro.MmdBall(ref, config.epsilon, dro.mmd_kernel_matrix(grid))
    rows = rng.normal(size=(132, len(grid)))
    timed("worst-case weights, 132 rows", lambda: dro.worst_case_weights(rows, ball), 3)
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="single replication seed (overrides config)")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--method", action="append", choices=METHODS, help="method to run; repeatable")
    common.add_argument("--epsilon", type=float, help="MMD ball radius (overrides config)")
    common.add_argument("--jobs", type=int, default=1, help="concurrent optimizer cells")

    parser = argparse.ArgumentParser(prog="drvqa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("sweep", parents=[common], help="optimize and score under shifted noise pdfs")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("landscape", parents=[common], help="two-parameter objective landscape scans")
    p.add_argument("--xi", type=float, nargs="+", default=[0.0, 0.06])
    p.add_argument("--steps", type=int, default=64)
    p.add_argument("--problem-index", type=int, default=0)
    p.set_defaults(func=cmd_landscape)
    p = sub.add_parser("inner-solver-check", parents=[common], help="worst-case solver vs simplex lattice")
    p.add_argument("--instances", type=int, default=200)
    p.set_defaults(func=cmd_inner_solver_check)
    p = sub.add_parser("gp-check", parents=[common], help="GP posterior vs dense linear algebra")
    p.set_defaults(func=cmd_gp_check)
    p = sub.add_parser("bench", parents=[common], help="time the hot paths")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.jobs < 1:
            raise DomainError("--jobs must be >= 1")
        return args.func(args)
    except (DomainError, ResourceError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ConsistencyError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
