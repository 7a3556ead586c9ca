"""Accelerated distance between ``conv(P)`` and ``conv(Q)`` by shifting a subpolytope on each side."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    EPS_ZERO,
    ConvexCoefficients,
    affine_lstsq,
    Tolerances,
    as_points,
    check_pair_optimality,
    cloud_scale,
)
from .nearest import (
    CorrectionFailure,
    Termination,
    _argmin_smallest,
    _blend_toward_affine,
    _caratheodory,
    _renormalized,
    default_eta,
    exact_grade,
    index_removal,
)
from .solvers import QPSolver, ReductionPairSolver, SolverTimeout, get_pair_solver, with_deadline


@dataclass
class PairState:
    index_set_P: list
    index_set_Q: list
    alpha: np.ndarray
    beta: np.ndarray
    v: np.ndarray
    w: np.ndarray
    theta: float
    rho_x: float = -np.inf
    rho_y: float = -np.inf
    outer_iter: int = 0
    correction_attempted: bool = False

    @property
    def coeffs_P(self) -> ConvexCoefficients:
        return ConvexCoefficients(tuple(self.index_set_P), _renormalized(self.alpha))

    @property
    def coeffs_Q(self) -> ConvexCoefficients:
        return ConvexCoefficients(tuple(self.index_set_Q), _renormalized(self.beta))


@dataclass
class PairReport:
    v: np.ndarray
    w: np.ndarray
    coeffs_P: ConvexCoefficients
    coeffs_Q: ConvexCoefficients
    outer_iterations: int
    corrections: int
    termination: Termination
    rho_x: float
    rho_y: float
    inner_iterations: int = 0
    branches: dict = field(default_factory=dict)
    thetas: list = field(default_factory=list)
    visited: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    message: str = ""

    @property
    def pair(self):
        return self.v, self.w

    @property
    def distance(self) -> float:
        return float(np.linalg.norm(self.v - self.w))


@dataclass(frozen=True)
class DistanceOptions:
    solver: str = "qp"  # pair solver name, see get_pair_solver
    eta: float | None = None
    init_P: tuple | None = None
    init_Q: tuple | None = None
    max_outer: int = 10_000
    trace: bool = False
    robust: bool = True
    accelerate: bool = True
    deadline: float | None = None


def default_pair_solver():
    return ReductionPairSolver(QPSolver())


def _init(d, size, init):
    if size <= d + 1:
        return list(range(size)), False
    if init is None:
        return list(range(d + 1)), True
    init = [int(i) for i in init]
    if len(init) != d + 1 or len(set(init)) != d + 1:
        raise ValueError(f"initial index set must hold {d + 1} distinct indices")
    if min(init) < 0 or max(init) >= size:
        raise IndexError("initial index out of range")
    return init, True


def _solve_pair(solver, I, X, J, Y):
    a, b = solver.solve_pair(I, X, J, Y)
    pos_a = {i: k for k, i in enumerate(a.support)}
    pos_b = {j: k for k, j in enumerate(b.support)}
    alpha = np.array([a.weights[pos_a[i]] for i in I])
    beta = np.array([b.weights[pos_b[j]] for j in J])
    return alpha, beta, a.stats.inner_iterations


def polish_pair(alpha, beta, I, X, J, Y, floor: float = 1e-9):
    """Joint exact affine re-solve on both supports; kept only if convex and no worse."""
    ka = np.flatnonzero(alpha > floor * alpha.max())
    kb = np.flatnonzero(beta > floor * beta.max())
    A, B = X[[I[k] for k in ka]], Y[[J[k] for k in kb]]
    a, b = affine_lstsq([A, -B], np.zeros(X.shape[1]))
    old = np.linalg.norm(alpha @ X[I] - beta @ Y[J])
    if min(a.min(), b.min()) < 0 or np.linalg.norm(a @ A - b @ B) > old:
        return alpha, beta
    new_a, new_b = np.zeros_like(alpha), np.zeros_like(beta)
    new_a[ka], new_b[kb] = a, b
    return new_a, new_b


def _make_state(I, J, alpha, beta, X, Y, n):
    v = alpha @ X[I]
    w = beta @ Y[J]
    return PairState(list(I), list(J), alpha, beta, v, w, float(np.linalg.norm(v - w)), outer_iter=n)


def _refresh_rho(state, X, Y, eta=0.0):
    opt = check_pair_optimality(state.v, state.w, X, Y, eta)
    state.rho_x, state.rho_y = opt.rho_x, opt.rho_y
    return opt


def _exchange(index_set, scores, remove, side):
    insert = int(np.argmin(scores))
    if insert in index_set and insert != remove:
        raise CorrectionFailure(f"{side}: steepest point {insert} already belongs to the subpolytope")
    out = list(index_set)
    out[out.index(remove)] = insert
    return out


def pair_index_removal(state: PairState, cloud_P, cloud_Q, eta: float = 0.0, eps_zero: float = EPS_ZERO):
    """Removable index on each side whose ``rho`` is below ``-eta``; ``None`` for the other sides."""
    X, Y = as_points(cloud_P), as_points(cloud_Q)
    i1 = index_removal(state.index_set_P, X, state.alpha, eps_zero) if state.rho_x < -eta else None
    j1 = index_removal(state.index_set_Q, Y, state.beta, eps_zero) if state.rho_y < -eta else None
    return i1, j1


def _min_weight(index_set, weights):
    return index_set[_argmin_smallest(weights, index_set)]


def _report(state, term, counters, thetas, visited, records, message=""):
    return PairReport(
        v=state.v,
        w=state.w,
        coeffs_P=state.coeffs_P,
        coeffs_Q=state.coeffs_Q,
        outer_iterations=state.outer_iter,
        corrections=counters["corrections"],
        termination=term,
        rho_x=state.rho_x,
        rho_y=state.rho_y,
        inner_iterations=counters["inner"],
        branches=dict(counters["branches"]),
        thetas=thetas,
        visited=visited,
        trace=records,
        message=message,
    )


def _new_counters():
    return {"corrections": 0, "inner": 0, "branches": {}}


def _check_deadline(deadline):
    if deadline is not None and time.monotonic() > deadline:
        raise SolverTimeout("outer loop: deadline exceeded")


def meta_distance_ideal(cloud_P, cloud_Q, pair_solver=None, init_P=None, init_Q=None, max_outer: int = 10_000,
                        eta: float | None = None, trace: bool = False, deadline: float | None = None) -> PairReport:
    """Two-sided subpolytope shifting with exact-grade pair solves.

    A side is exchanged only while its own optimality value is below
    ``-eta``; by default ``eta`` is ``1e-12`` times the squared joint radius.
    The pair solver runs with its tolerance capped at ``eta`` and each answer
    is polished by a joint exact affine solve on the two supports.
    """
    X, Y = as_points(cloud_P), as_points(cloud_Q)
    d = X.shape[1]
    pair_solver = pair_solver or default_pair_solver()
    if eta is None:
        both = np.vstack([X, Y])
        eta = 1e-12 * cloud_scale(both, both.mean(axis=0))
    pair_solver = exact_grade(pair_solver, eta)
    I, move_p = _init(d, X.shape[0], init_P)
    J, move_q = _init(d, Y.shape[0], init_Q)
    counters = _new_counters()
    thetas, visited, records = [], [], []
    n = 0
    while True:
        _check_deadline(deadline)
        alpha, beta, inner = _solve_pair(pair_solver, I, X, J, Y)
        counters["inner"] += inner
        alpha, beta = polish_pair(alpha, beta, I, X, J, Y)
        state = _make_state(I, J, alpha, beta, X, Y, n)
        opt = _refresh_rho(state, X, Y, eta)
        thetas.append(state.theta)
        visited.append((tuple(I), tuple(J)))
        if trace:
            records.append({"n": n, "I": list(I), "J": list(J), "theta": state.theta,
                            "rho_x": state.rho_x, "rho_y": state.rho_y})
        if opt.satisfied:
            return _report(state, Termination.OPTIMAL, counters, thetas, visited, records)
        if n >= max_outer:
            return _report(state, Termination.ITERATION_CAP, counters, thetas, visited, records)
        gap = state.v - state.w
        try:
            i1, j1 = pair_index_removal(state, X, Y, eta)
            if i1 is not None:
                if not move_p:
                    raise CorrectionFailure("P: whole cloud already in use but optimality fails")
                I = _exchange(I, X @ gap, i1, "P")
            if j1 is not None:
                if not move_q:
                    raise CorrectionFailure("Q: whole cloud already in use but optimality fails")
                J = _exchange(J, Y @ -gap, j1, "Q")
        except CorrectionFailure as exc:
            return _report(state, Termination.CORRECTION_FAILURE, counters, thetas, visited, records, str(exc))
        n += 1


def _correct_side(weights, point, index_set, pts, target, eps_zero, theta):
    if len(index_set) == 1:
        return weights, point, "singleton"  # a lone weight can never be zeroed, nor needs to be
    weights, point, kind = _blend_toward_affine(weights, point, index_set, pts, target, eps_zero, theta)
    if kind == "dependent":
        weights, _, _ = _caratheodory(weights, index_set, pts)
        point = weights @ pts[index_set]
        kind = "caratheodory"
    return weights, point, kind


def coefficients_correction(state: PairState, cloud_P, cloud_Q, tol: Tolerances | None = None) -> list:
    """Restore a zero weight on the offending sides, updating ``state`` in place.

    The P side is touched only when ``rho_x < -eta``; the Q side is always
    processed, aiming at the already corrected ``v``. Returns the branches
    taken as ``(side, kind)`` pairs, kind one of ``blend``, ``adopt``,
    ``caratheodory`` or ``singleton`` (one-point side, left as is).
    """
    X, Y = as_points(cloud_P), as_points(cloud_Q)
    tol = tol or Tolerances()
    theta_in = state.theta
    taken = []
    if state.rho_x < -tol.eta:
        state.alpha, state.v, kind = _correct_side(state.alpha, state.v, state.index_set_P, X, state.w,
                                                   tol.eps_zero, state.theta)
        state.theta = float(np.linalg.norm(state.v - state.w))
        taken.append(("P", kind))
    state.beta, state.w, kind = _correct_side(state.beta, state.w, state.index_set_Q, Y, state.v, tol.eps_zero,
                                              state.theta)
    state.theta = float(np.linalg.norm(state.v - state.w))
    taken.append(("Q", kind))
    if state.theta > theta_in * (1 + 1e-12) + 1e-15:
        raise CorrectionFailure("coefficient correction increased the distance")
    for weights in (state.alpha, state.beta):
        if abs(weights.sum() - 1.0) > 1e-9:
            raise CorrectionFailure("corrected weights do not sum to one")
    state.correction_attempted = True
    return taken


def meta_distance_robust(cloud_P, cloud_Q, pair_solver=None, tol: Tolerances | None = None, init_P=None,
                         init_Q=None, trace: bool = False, deadline: float | None = None) -> PairReport:
    """Two-sided subpolytope shifting for inexact pair solvers.

    Stops once both sides' optimality values reach ``-eta``; a failed decay
    runs one coefficient correction, a second failure in the same iteration
    ends the run.
    """
    X, Y = as_points(cloud_P), as_points(cloud_Q)
    if X.shape[1] != Y.shape[1]:
        raise ValueError("clouds live in different dimensions")
    d = X.shape[1]
    pair_solver = pair_solver or default_pair_solver()
    tol = tol or Tolerances(eta=default_eta(d))
    I, move_p = _init(d, X.shape[0], init_P)
    J, move_q = _init(d, Y.shape[0], init_Q)
    counters = _new_counters()
    records = []

    alpha, beta, inner = _solve_pair(pair_solver, I, X, J, Y)
    counters["inner"] += inner
    state = _make_state(I, J, alpha, beta, X, Y, 0)
    thetas = [state.theta]
    visited = [(tuple(I), tuple(J))]
    corrected = []

    while True:
        _check_deadline(deadline)
        opt = _refresh_rho(state, X, Y, tol.eta)
        if trace:
            records.append({"n": state.outer_iter, "I": list(state.index_set_P), "J": list(state.index_set_Q),
                            "theta": state.theta, "rho_x": state.rho_x, "rho_y": state.rho_y,
                            "corrections": [f"{s}:{k}" for s, k in corrected]})
        if opt.satisfied:
            return _report(state, Termination.OPTIMAL, counters, thetas, visited, records)
        if state.outer_iter >= tol.max_outer:
            return _report(state, Termination.ITERATION_CAP, counters, thetas, visited, records)
        gap = state.v - state.w
        I_next, J_next = list(state.index_set_P), list(state.index_set_Q)
        try:
            if state.rho_x < -tol.eta:
                if not move_p:
                    raise CorrectionFailure("P: whole cloud already in use but optimality fails")
                I_next = _exchange(I_next, X @ gap, _min_weight(I_next, state.alpha), "P")
            if state.rho_y < -tol.eta:
                if not move_q:
                    raise CorrectionFailure("Q: whole cloud already in use but optimality fails")
                J_next = _exchange(J_next, Y @ -gap, _min_weight(J_next, state.beta), "Q")
        except CorrectionFailure as exc:
            return _report(state, Termination.CORRECTION_FAILURE, counters, thetas, visited, records, str(exc))

        alpha, beta, inner = _solve_pair(pair_solver, I_next, X, J_next, Y)
        counters["inner"] += inner
        candidate = _make_state(I_next, J_next, alpha, beta, X, Y, state.outer_iter + 1)
        if candidate.theta < state.theta:
            state = candidate
            thetas.append(state.theta)
            visited.append((tuple(I_next), tuple(J_next)))
            corrected = []
            continue

        if state.correction_attempted:
            return _report(state, Termination.CORRECTION_FAILURE, counters, thetas, visited, records,
                           "a second coefficient correction was needed within one iteration")
        try:
            corrected = coefficients_correction(state, X, Y, tol)
        except CorrectionFailure as exc:
            return _report(state, Termination.CORRECTION_FAILURE, counters, thetas, visited, records, str(exc))
        counters["corrections"] += 1
        for side, kind in corrected:
            key = f"{side}:{kind}"
            counters["branches"][key] = counters["branches"].get(key, 0) + 1
        thetas[-1] = state.theta


def _direct(X, Y, pair_solver, eta):
    I, J = list(range(X.shape[0])), list(range(Y.shape[0]))
    alpha, beta, inner = _solve_pair(pair_solver, I, X, J, Y)
    state = _make_state(I, J, alpha, beta, X, Y, 0)
    opt = _refresh_rho(state, X, Y, eta)
    term = Termination.OPTIMAL if opt.satisfied else Termination.ITERATION_CAP
    counters = _new_counters()
    counters["inner"] = inner
    return _report(state, term, counters, [state.theta], [(tuple(I), tuple(J))], [])


def distance(cloud_P, cloud_Q, options: DistanceOptions | None = None, pair_solver=None, **overrides) -> PairReport:
    """Closest pair between the convex hulls of two clouds."""
    options = options or DistanceOptions()
    if overrides:
        options = DistanceOptions(**{**options.__dict__, **overrides})
    X, Y = as_points(cloud_P), as_points(cloud_Q)
    if X.shape[1] != Y.shape[1]:
        raise ValueError("clouds live in different dimensions")
    pair_solver = pair_solver or get_pair_solver(options.solver)
    if options.deadline is not None:
        pair_solver = with_deadline(pair_solver, options.deadline)
    eta = options.eta if options.eta is not None else default_eta(X.shape[1])
    if not options.accelerate:
        return _direct(X, Y, pair_solver, eta)
    if not options.robust:
        return meta_distance_ideal(X, Y, pair_solver, options.init_P, options.init_Q, options.max_outer,
                                   options.eta, options.trace, options.deadline)
    tol = Tolerances(eta=eta, max_outer=options.max_outer)
    return meta_distance_robust(X, Y, pair_solver, tol, options.init_P, options.init_Q, options.trace,
                                options.deadline)
