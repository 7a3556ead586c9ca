"""``polyproj`` command line: project, distance, bench.

Exit codes: 0 success, 2 correction failure, 3 iteration cap or timeout, 4 bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from .bench import BenchConfig, aggregate, emit_csv, emit_plotdata, run_suite
from .distance import DistanceOptions, distance
from .formats import CloudFormatError, read_cloud, read_point
from .nearest import ProjectOptions, Termination, project
from .solvers import NEAREST_SOLVERS, PAIR_SOLVERS, SolverTimeout

EXIT_OK, EXIT_CORRECTION, EXIT_CAP, EXIT_INPUT = 0, 2, 3, 4
_EXIT = {Termination.OPTIMAL: EXIT_OK, Termination.CORRECTION_FAILURE: EXIT_CORRECTION,
         Termination.ITERATION_CAP: EXIT_CAP}


class InputError(Exception):
    pass


def _int_list(text):
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _deadline(timeout):
    return None if timeout is None else time.monotonic() + timeout


def _emit_trace(records):
    for rec in records:
        print(json.dumps(rec), file=sys.stderr)


def _floats(a):
    return [float(x) for x in np.asarray(a).ravel()]


def cmd_project(args) -> int:
    cloud = read_cloud(args.cloud)
    z = np.zeros(cloud.dim) if args.z == "origin" else read_point(args.z, cloud.dim)
    opts = ProjectOptions(solver=args.solver, eta=args.eta, init=args.init, max_outer=args.max_outer,
                          trace=args.trace, robust=not args.ideal, accelerate=not args.no_accel,
                          scaled_stop=args.scaled_stop, deadline=_deadline(args.timeout))
    if args.init is not None and (len(args.init) != cloud.dim + 1 or min(args.init) < 0
                                  or max(args.init) >= cloud.size):
        raise InputError(f"--init needs {cloud.dim + 1} indices in [0, {cloud.size})")
    rep = project(z, cloud, opts)
    if args.trace:
        _emit_trace(rep.trace)
    out = {
        "projection": _floats(rep.projection),
        "distance": float(np.linalg.norm(rep.projection - z)),
        "weights": {str(k): v for k, v in rep.coeffs_global.as_dict().items()},
        "outer_iterations": rep.outer_iterations,
        "inner_iterations": rep.inner_iterations,
        "corrections_step3": rep.corrections_step3,
        "corrections_step4": rep.corrections_step4,
        "final_worst_value": rep.final_worst_value,
        "termination": rep.termination.value,
    }
    if rep.message:
        out["message"] = rep.message
    print(json.dumps(out, indent=1))
    return _EXIT[rep.termination]


def cmd_distance(args) -> int:
    P, Q = read_cloud(args.cloud_p), read_cloud(args.cloud_q)
    if P.dim != Q.dim:
        raise InputError(f"clouds have dimensions {P.dim} and {Q.dim}")
    opts = DistanceOptions(solver=args.solver, eta=args.eta, init_P=args.init_p, init_Q=args.init_q,
                           max_outer=args.max_outer, trace=args.trace, robust=not args.ideal,
                           accelerate=not args.no_accel, deadline=_deadline(args.timeout))
    rep = distance(P, Q, opts)
    if args.trace:
        _emit_trace(rep.trace)
    out = {
        "v": _floats(rep.v),
        "w": _floats(rep.w),
        "distance": rep.distance,
        "weights_p": {str(k): v for k, v in rep.coeffs_P.as_dict().items()},
        "weights_q": {str(k): v for k, v in rep.coeffs_Q.as_dict().items()},
        "outer_iterations": rep.outer_iterations,
        "corrections": rep.corrections,
        "rho_x": rep.rho_x,
        "rho_y": rep.rho_y,
        "termination": rep.termination.value,
    }
    if rep.message:
        out["message"] = rep.message
    print(json.dumps(out, indent=1))
    return _EXIT[rep.termination]


def cmd_bench(args) -> int:
    modes = {"both": (True, False), "accel": (True,), "plain": (False,)}[args.modes]
    known = set(NEAREST_SOLVERS) if args.kind == "nearest" else set(PAIR_SOLVERS)
    unknown = [s for s in args.solvers if s not in known]
    if unknown:
        raise InputError(f"unknown solver(s) {unknown} for kind {args.kind}")
    config = BenchConfig(kind=args.kind, d_values=args.d, ell_values=args.ell, trials=args.trials,
                         solvers=args.solvers, modes=modes, eta=args.eta, seed=args.seed, timeout=args.timeout,
                         serial=args.serial, workers=args.workers)

    def progress(rec):
        if args.verbose:
            print(f"d={rec.d} ell={rec.ell} {rec.solver} accel={rec.accelerated} trial={rec.trial} "
                  f"{rec.status} t={rec.wall_time:.4f}s outer={rec.outer_iters}", file=sys.stderr)

    records = run_suite(config, progress)
    emit_csv(records, args.out)
    if args.plotdata:
        emit_plotdata(records, args.plotdata)
    for cell in aggregate(records):
        print(f"d={cell['d']:<3} ell={cell['ell']:<6} {cell['solver']:<8} "
              f"{'accel' if cell['accelerated'] else 'plain'}  finished {cell['finished']}/{cell['runs']}  "
              f"mean time {cell['mean_time']:.4g}s  mean outer {cell['mean_outer']:.4g}")
    statuses = {r.status for r in records}
    if "correction_failure" in statuses:
        return EXIT_CORRECTION
    if statuses & {"iteration_cap", "timeout"} or any(s.startswith("error") for s in statuses):
        return EXIT_CAP
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polyproj", description="Nearest points and distances for V-polytopes.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, solver_choices, default_solver):
        p.add_argument("--solver", default=default_solver, choices=sorted(solver_choices))
        p.add_argument("--eta", type=float, default=None, help="stopping slack (default 1e-4, 5e-4 for d >= 50)")
        p.add_argument("--no-accel", action="store_true", help="solve over the whole cloud in one call")
        p.add_argument("--ideal", action="store_true", help="use the exact-solver variant")
        p.add_argument("--max-outer", type=int, default=10_000)
        p.add_argument("--timeout", type=float, default=None, help="seconds")
        p.add_argument("--trace", action="store_true", help="one JSON line per outer iteration on stderr")

    p = sub.add_parser("project", help="project a point onto the hull of a cloud")
    p.add_argument("--cloud", required=True)
    p.add_argument("--z", default="origin", help="file with the query point, or 'origin'")
    p.add_argument("--init", type=_int_list, default=None, help="0-based initial indices, comma separated")
    p.add_argument("--scaled-stop", action="store_true", help="scale the slack by ||x_i - y||")
    common(p, NEAREST_SOLVERS, "wolfe")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("distance", help="distance between the hulls of two clouds")
    p.add_argument("--cloud-p", required=True)
    p.add_argument("--cloud-q", required=True)
    p.add_argument("--init-p", type=_int_list, default=None)
    p.add_argument("--init-q", type=_int_list, default=None)
    common(p, PAIR_SOLVERS, "qp")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("bench", help="run a generated benchmark suite and write CSV")
    p.add_argument("--kind", choices=("nearest", "distance"), default="nearest")
    p.add_argument("--d", type=_int_list, default=(3,))
    p.add_argument("--ell", type=_int_list, default=(100,))
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--solvers", type=_str_list, default=("qp",))
    p.add_argument("--modes", choices=("both", "accel", "plain"), default="both")
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--out", default="results.csv")
    p.add_argument("--plotdata", default=None, help="also write per-ell mean series as JSON")
    p.add_argument("--serial", action="store_true", help="single thread; use for timing comparisons")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, CloudFormatError, OSError, ValueError, IndexError, KeyError) as exc:
        print(f"polyproj: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverTimeout as exc:
        print(f"polyproj: timeout: {exc}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
