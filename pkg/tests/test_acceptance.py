"""Acceptance criteria, one test each.

Every test prints a ``PASS``/``FAIL`` line; the lines are repeated in the
pytest summary and printed when this file is run as a script.
"""

import functools
import itertools
import sys

import numpy as np

from helpers import ACCEPTANCE, EXCHANGE_CLOUD, WORKED, WORKED_OPT, simplex_only_cloud, no_repeats
from polyproj.bench import BenchConfig, derive_seed, gen_compressed_cube, gen_two_cubes, run_suite, speedup
from polyproj.distance import DistanceOptions, PairState, coefficients_correction, distance
from polyproj.geometry import Tolerances, affine_dependence_vector, check_pair_optimality, evaluate_point
from polyproj.nearest import (
    ProjectOptions,
    SubpolytopeState,
    Termination,
    correct_coefficients,
    decay_audit,
    project,
    steepest_descent_exchange,
)
from polyproj.solvers import PairOracleSolver, WolfeSolver, get_solver, oracle_solve

NEAREST = ("wolfe", "mdm", "qp", "oracle")
PAIRS = ("wolfe", "mdm", "qp", "qp-pair", "oracle")


def report(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    assert ok, line


# -------------------------------------------------------------------------------- runs shared with 4 and 8


@functools.lru_cache(maxsize=None)
def worked_runs():
    return [project(np.zeros(2), WORKED, ProjectOptions(solver=s, robust=r, init=(0, 1, 2)))
            for s in NEAREST for r in (True, False)]


@functools.lru_cache(maxsize=None)
def oracle_runs():
    rng = np.random.default_rng(20240301)
    near, pair = [], []
    for _ in range(500):
        d, ell = int(rng.choice([2, 3])), int(rng.integers(5, 13))
        X, z = rng.normal(size=(ell, d)), rng.normal(size=d) * 2
        ref = oracle_solve(z, range(ell), X)
        x_star = evaluate_point(ref, X)
        for s in NEAREST:
            for robust in (True, False):
                rep = project(z, X, ProjectOptions(solver=s, robust=robust))
                eta = 1e-4 if robust else 0.0
                near.append((s, robust, rep, np.linalg.norm(rep.projection - x_star), max(1e-6, np.sqrt(eta))))
    for _ in range(200):
        d, ell, m = int(rng.choice([2, 3])), int(rng.integers(1, 9)), int(rng.integers(1, 9))
        X = rng.normal(size=(ell, d))
        Y = rng.normal(size=(m, d)) + rng.normal(size=d) * rng.choice([0.0, 1.0, 3.0])
        a, b = PairOracleSolver().solve_pair(range(ell), X, range(m), Y)
        gap = a.weights @ X - b.weights @ Y
        for s in PAIRS:
            for robust in (True, False):
                rep = distance(X, Y, DistanceOptions(solver=s, robust=robust))
                eta = 1e-4 if robust else 0.0
                pair.append((s, robust, rep, np.linalg.norm(rep.v - rep.w - gap), max(1e-6, np.sqrt(2 * eta))))
    return near, pair


@functools.lru_cache(maxsize=None)
def iteration_runs():
    runs = {}
    for d in (3, 10):
        for s in ("wolfe", "qp"):
            reps = []
            for trial in range(10):
                inst = gen_compressed_cube(d, 2000, derive_seed(0, "nearest", d, 2000, trial))
                reps.append(project(inst.z, inst.clouds[0], ProjectOptions(solver=s)))
            runs[(d, s)] = reps
    return runs


@functools.lru_cache(maxsize=None)
def two_cube_runs():
    runs = []
    for d in (3, 10):
        for ell in (100, 500):
            for trial in range(5):
                inst = gen_two_cubes(d, ell, derive_seed(0, "distance", d, ell, trial))
                for s in ("qp", "wolfe"):
                    runs.append((s, inst, distance(*inst.clouds, DistanceOptions(solver=s, eta=1e-4))))
    return runs


# -------------------------------------------------------------------------------- criteria


def test_criterion_01_worked_example():
    errs = []
    for s in NEAREST:
        c = get_solver(s).solve(np.zeros(2), range(4), WORKED)
        tol = 1e-4 if s == "mdm" else 1e-10
        w = c.dense(4)
        ok = (np.linalg.norm(evaluate_point(c, WORKED) - WORKED_OPT) <= tol
              and abs(w[2] - 7 / 17) <= tol and abs(w[3] - 10 / 17) <= tol and w[:2].max() <= tol)
        if not ok:
            errs.append(s)
    exchanges = set()
    for rep in worked_runs():
        a, b = rep.visited[0], rep.visited[1]
        exchanges.add((rep.outer_iterations, tuple(set(a) - set(b)), tuple(set(b) - set(a))))
        if np.linalg.norm(rep.projection - WORKED_OPT) > 1e-4:
            errs.append("meta")
    ok = not errs and exchanges == {(1, (0,), (3,))}
    report(1, ok, f"(-6/17, 24/17) by all solvers, one exchange removing x_1 for x_4; exchanges seen {exchanges}")


def test_criterion_02_exchange_trace():
    c = WolfeSolver().solve(np.zeros(2), [0, 1, 2], EXCHANGE_CLOUD)
    alpha = c.dense(4)[:3]
    y = evaluate_point(c, EXCHANGE_CLOUD)
    state = SubpolytopeState([0, 1, 2], alpha, y, float(np.linalg.norm(y)))
    dec = steepest_descent_exchange(state, np.zeros(2), EXCHANGE_CLOUD)
    _, residual = affine_dependence_vector([1, 2, 3], EXCHANGE_CLOUD, pivot=1)
    ok = (np.allclose(y, [1, 1]) and np.allclose(alpha, [0, 0, 1]) and dec == (0, 3) and residual <= 1e-10)
    report(2, ok, f"y0={y}, alpha0={alpha}, exchange={tuple(dec)}, I1 dependence residual {residual:.1e}")


def test_criterion_03_oracle_equivalence():
    near, pair = oracle_runs()
    bad_n = [(s, r) for s, r, rep, err, tol in near if err > tol or rep.termination is not Termination.OPTIMAL]
    bad_p = [(s, r) for s, r, rep, err, tol in pair if err > tol or rep.termination is not Termination.OPTIMAL]
    worst_n = max(err for *_, err, _ in near)
    worst_p = max(err for *_, err, _ in pair)
    ok = not bad_n and not bad_p
    report(3, ok, f"{len(near) // 8} nearest x 8 configs, {len(pair) // 10} pair x 10 configs; "
                  f"misses {len(bad_n)}+{len(bad_p)}; worst errors {worst_n:.1e} / {worst_p:.1e}")


def test_criterion_04_decay_and_no_repeats():
    near, pair = oracle_runs()
    reps = list(worked_runs()) + [r[2] for r in near] + [r[2] for r in pair]
    reps += [rep for runs in iteration_runs().values() for rep in runs]
    bad_decay = sum(not decay_audit(rep.thetas) for rep in reps)
    bad_repeat = sum(not no_repeats(rep.visited) for rep in reps)
    report(4, bad_decay == bad_repeat == 0, f"{len(reps)} runs; decay violations {bad_decay}, "
                                            f"repeated index sets {bad_repeat}")


def test_criterion_05_full_simplex_needed():
    pts, _ = simplex_only_cloud(3)
    full = oracle_solve(np.zeros(3), range(4), pts)
    d_full = np.linalg.norm(evaluate_point(full, pts))
    d_sub = [np.linalg.norm(evaluate_point(oracle_solve(np.zeros(3), K, pts), pts))
             for K in itertools.combinations(range(4), 3)]
    ok = d_full < 1e-12 and min(d_sub) > 0
    report(5, ok, f"dist(0, P) = {d_full:.1e}; smallest 3-point distance {min(d_sub):.4f}")


def test_criterion_06_iteration_counts():
    target = {3: 6.0, 10: 25.6}
    tol = {3: 4.0, 10: 10.0}
    means, ok = {}, True
    for (d, s), reps in iteration_runs().items():
        mean = float(np.mean([r.outer_iterations for r in reps]))
        means[(d, s)] = mean
        ok &= abs(mean - target[d]) <= tol[d] and d <= mean <= 10 * d
        ok &= all(r.termination is Termination.OPTIMAL for r in reps)
    detail = ", ".join(f"d={d} {s}: {m:.1f}" for (d, s), m in means.items())
    report(6, ok, f"mean outer iterations (10 trials, ell=2000) {detail}")


def test_criterion_07_speedup_trend():
    cfg = BenchConfig(d_values=(3,), ell_values=(500, 5000), trials=5, solvers=("qp",), serial=True, seed=7)
    recs = run_suite(cfg)
    r500, r5000 = speedup(recs, 3, 500, "qp"), speedup(recs, 3, 5000, "qp")
    ok = r5000 > 1 and r5000 > r500 and all(r.status == "optimal_eta" for r in recs)
    report(7, ok, f"plain/accelerated time ratio {r500:.2f} at ell=500, {r5000:.2f} at ell=5000")


def test_criterion_08_wolfe_never_corrects():
    near, pair = oracle_runs()
    counts = [rep.corrections_step3 + rep.corrections_step4 for s, robust, rep, *_ in near if s == "wolfe"]
    counts += [rep.corrections_step3 + rep.corrections_step4 for rep in sum(
        (v for (d, s), v in iteration_runs().items() if s == "wolfe"), [])]
    counts += [rep.corrections for s, robust, rep, *_ in pair if s == "wolfe"]
    counts += [rep.corrections for s, _, rep in two_cube_runs() if s == "wolfe"]
    report(8, sum(counts) == 0, f"{len(counts)} wolfe runs, {sum(counts)} corrections")


def test_criterion_09_two_cube_distances():
    bad, lo, hi = 0, np.inf, -np.inf
    for s, inst, rep in two_cube_runs():
        P, Q = inst.clouds
        ok = (1.98 <= rep.distance <= 2.02 and check_pair_optimality(rep.v, rep.w, P, Q, 1e-4).satisfied)
        bad += not ok
        lo, hi = min(lo, rep.distance), max(hi, rep.distance)
    report(9, bad == 0, f"{len(two_cube_runs())} runs, distances in [{lo:.4f}, {hi:.4f}], failures {bad}")


def _nearest_branch(pts, alpha, z):
    alpha = np.asarray(alpha, float)
    y = alpha @ pts
    state = SubpolytopeState([0, 1, 2], alpha, y, float(np.linalg.norm(y - z)))
    before = state.theta
    branch = correct_coefficients(state, z, pts)
    ok = (abs(state.alpha.sum() - 1) <= 1e-12 and state.alpha.min() == 0.0 and state.theta <= before + 1e-15
          and np.allclose(state.alpha @ pts, state.trial_point))
    return branch, ok


def _pair_branch(X, Y, alpha, beta, rho_x=None):
    alpha, beta = np.asarray(alpha, float), np.asarray(beta, float)
    v, w = alpha @ X, beta @ Y
    state = PairState(list(range(len(X))), list(range(len(Y))), alpha, beta, v, w, float(np.linalg.norm(v - w)))
    opt = check_pair_optimality(v, w, X, Y)
    state.rho_x, state.rho_y = (opt.rho_x if rho_x is None else rho_x), opt.rho_y
    before = state.theta
    taken = coefficients_correction(state, X, Y, Tolerances(eta=1e-4))
    ok = (abs(state.alpha.sum() - 1) <= 1e-12 and abs(state.beta.sum() - 1) <= 1e-12
          and state.theta <= before * (1 + 1e-12)
          and all((state.alpha if side == "P" else state.beta).min() == 0.0
                  for side, kind in taken if kind != "singleton"))
    return taken, ok


def test_criterion_10_correction_branches():
    tri = np.array([(1.0, 0.0), (2.0, 1.0), (2.0, -1.0)])
    line = np.array([(-1.0, 1.0), (0.0, 1.0), (1.0, 1.0)])
    results = {
        "beta_min<0": _nearest_branch(tri, [1 / 3] * 3, np.zeros(2)),
        "beta_min=0": _nearest_branch(tri, [1 / 3] * 3, np.array([2.0, 0.0])),
        "beta_min>0": _nearest_branch(line, [0.25, 0.5, 0.25], np.zeros(2)),
    }
    expected = {"beta_min<0": "step3", "beta_min=0": "step3", "beta_min>0": "step4"}
    ok = all(results[k][0] == expected[k] and results[k][1] for k in results)
    pair_cases = {
        "P blend, Q blend": _pair_branch(tri, -tri, [1 / 3] * 3, [1 / 3] * 3),
        "P caratheodory": _pair_branch(line, np.array([(0.0, -2.0)]), [0.25, 0.5, 0.25], [1.0], rho_x=-1.0),
        "Q adopt": _pair_branch(np.zeros((1, 2)), np.array([(-1.0, 0.0), (1.0, 0.0), (0.0, 2.0)]), [1.0],
                                [1 / 3] * 3, rho_x=0.0),
        "Q caratheodory": _pair_branch(np.array([(0.0, -2.0)]), line, [1.0], [0.25, 0.5, 0.25]),
    }
    kinds = set()
    for taken, case_ok in pair_cases.values():
        ok &= case_ok
        kinds |= {f"{side}:{kind}" for side, kind in taken}
    ok &= kinds >= {"P:blend", "Q:blend", "P:caratheodory", "Q:adopt", "Q:caratheodory"}
    report(10, ok, f"nearest branches {sorted((k, v[0]) for k, v in results.items())}; "
                   f"correction-method branches {sorted(kinds)}")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
