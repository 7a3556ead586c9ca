"""Accelerated projection onto ``conv{x_1, ..., x_ell}`` by shifting a (d+1)-point subpolytope."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple

import numpy as np

from .geometry import (
    EPS_ZERO,
    ConvexCoefficients,
    Tolerances,
    affine_dependence_vector,
    as_points,
    check_optimality,
    cloud_scale,
    project_affine_hull,
)
from .solvers import SolverTimeout, get_solver


class Termination(str, Enum):
    OPTIMAL = "optimal_eta"
    ITERATION_CAP = "iteration_cap"
    CORRECTION_FAILURE = "correction_failure"


class CorrectionFailure(RuntimeError):
    pass


@dataclass
class SubpolytopeState:
    index_set: list
    alpha: np.ndarray  # aligned with index_set
    trial_point: np.ndarray
    theta: float
    outer_iter: int = 0
    correction_attempted: bool = False

    @property
    def coeffs(self) -> ConvexCoefficients:
        return ConvexCoefficients(tuple(self.index_set), _renormalized(self.alpha))


class ExchangeDecision(NamedTuple):
    remove_index: int
    insert_index: int


@dataclass
class SolveReport:
    projection: np.ndarray
    coeffs_global: ConvexCoefficients
    outer_iterations: int
    corrections_step3: int
    corrections_step4: int
    termination: Termination
    final_worst_value: float
    inner_iterations: int = 0
    thetas: list = field(default_factory=list)
    visited: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    message: str = ""

    @property
    def distance(self) -> float:
        return self.thetas[-1] if self.thetas else float("nan")


@dataclass(frozen=True)
class ProjectOptions:
    solver: str = "wolfe"
    eta: float | None = None  # None: 1e-4, or 5e-4 from d = 50 on
    init: tuple | None = None
    max_outer: int = 10_000
    trace: bool = False
    robust: bool = True
    accelerate: bool = True
    scaled_stop: bool = False
    deadline: float | None = None


def default_eta(d: int) -> float:
    return 5e-4 if d >= 50 else 1e-4


def _renormalized(alpha):
    alpha = np.where(alpha > 0, alpha, 0.0)
    return alpha / alpha.sum()


def exact_grade(solver, eps: float):
    """Copy of ``solver`` whose tolerance is at most ``eps`` (pair reductions: their inner solver)."""
    inner = getattr(solver, "inner", None)
    if inner is not None:
        return replace(solver, inner=exact_grade(inner, eps))
    if getattr(solver, "epsilon", 0.0) > eps:
        return replace(solver, epsilon=eps)
    return solver


def _argmin_smallest(values, labels):
    """Position of the minimum of ``values``; exact ties go to the smallest label."""
    values = np.asarray(values)
    tied = np.flatnonzero(values == values.min())
    return int(tied[np.argmin(np.asarray(labels)[tied])])


def _default_init(d, ell, init):
    if init is None:
        return list(range(d + 1))
    init = [int(i) for i in init]
    if len(init) != d + 1 or len(set(init)) != d + 1:
        raise ValueError(f"initial index set must hold {d + 1} distinct indices")
    if min(init) < 0 or max(init) >= ell:
        raise IndexError("initial index out of range")
    return init


def _check_deadline(deadline):
    if deadline is not None and time.monotonic() > deadline:
        raise SolverTimeout("outer loop: deadline exceeded")


def index_removal(indices, cloud, alpha, eps_zero: float = EPS_ZERO) -> int:
    """Index whose point can leave ``indices`` while keeping ``sum alpha_i x_i`` in the hull.

    A (near) zero weight is taken directly; otherwise an affine dependence
    among the points gives the Caratheodory step that zeroes one weight.
    """
    indices = list(indices)
    alpha = np.asarray(alpha, dtype=float)
    if alpha.min() <= eps_zero:
        return indices[_argmin_smallest(alpha, indices)]
    gamma, residual = affine_dependence_vector(indices, cloud, pivot=indices[0])
    pts = as_points(cloud)
    if residual > 1e-9 * max(1.0, float(np.abs(pts[indices]).max())):
        # independent points: no dependence to exploit, and an exact solve would
        # have produced a zero weight, so the smallest weight is the inexact stand-in
        return indices[_argmin_smallest(alpha, indices)]
    neg = np.flatnonzero(gamma < 0)
    if neg.size == 0:
        raise CorrectionFailure("no negative entry in the affine dependence vector")
    ratios = -alpha[neg] / gamma[neg]
    k = neg[_argmin_smallest(ratios, np.asarray(indices)[neg])]
    return indices[int(k)]


def steepest_descent_exchange(state: SubpolytopeState, z, cloud, removal: str = "min_weight") -> ExchangeDecision:
    """Insert the global minimizer of ``<y - z, x_i>``; remove a min-weight (or Caratheodory) index.

    Raises :class:`CorrectionFailure` if the inserted index already sits in the
    subpolytope under another position.
    """
    pts = as_points(cloud)
    y = state.trial_point
    scores = pts @ (y - np.asarray(z, dtype=float))
    insert = int(np.argmin(scores))
    if removal == "min_weight":
        remove = state.index_set[_argmin_smallest(state.alpha, state.index_set)]
    else:
        remove = index_removal(state.index_set, pts, state.alpha)
    if insert in state.index_set and insert != remove:
        raise CorrectionFailure(
            f"steepest point {insert} already belongs to the subpolytope; eta is too small for the inner accuracy"
        )
    return ExchangeDecision(remove, insert)


def decay_audit(thetas) -> bool:
    thetas = list(thetas)
    return all(b < a for a, b in zip(thetas, thetas[1:]))


def _solve_sub(solver, z, indices, pts):
    coeffs = solver.solve(z, indices, pts)
    # reorder to the index-set order
    order = {i: p for p, i in enumerate(coeffs.support)}
    alpha = np.array([coeffs.weights[order[i]] for i in indices])
    return alpha, coeffs.stats.inner_iterations


def polish(alpha, index_set, pts, z, floor: float = 1e-9):
    """Exact affine re-solve on the support the solver found; kept only if convex and no worse."""
    keep = np.flatnonzero(alpha > floor * alpha.max())
    sub = [index_set[k] for k in keep]
    beta, h = project_affine_hull(sub, pts, z)
    y = alpha @ pts[index_set]
    if beta.min() < 0 or np.linalg.norm(h - z) > np.linalg.norm(y - z):
        return alpha
    out = np.zeros_like(alpha)
    out[keep] = beta
    return out


def _direct(z, pts, solver, eta, scaled):
    coeffs = solver.solve(z, np.arange(pts.shape[0]), pts)
    y = coeffs.weights @ pts[list(coeffs.support)]
    opt = check_optimality(y, z, pts, eta, scaled)
    term = Termination.OPTIMAL if opt.satisfied else Termination.ITERATION_CAP
    return SolveReport(
        projection=y,
        coeffs_global=coeffs,
        outer_iterations=0,
        corrections_step3=0,
        corrections_step4=0,
        termination=term,
        final_worst_value=opt.worst_value,
        inner_iterations=coeffs.stats.inner_iterations,
        thetas=[float(np.linalg.norm(y - z))],
        visited=[tuple(coeffs.support)],
    )


def _report(state, pts, z, opt, term, counters, thetas, visited, trace, message=""):
    coeffs = state.coeffs
    y = coeffs.weights @ pts[list(coeffs.support)]
    return SolveReport(
        projection=y,
        coeffs_global=coeffs,
        outer_iterations=state.outer_iter,
        corrections_step3=counters["step3"],
        corrections_step4=counters["step4"],
        termination=term,
        final_worst_value=opt.worst_value,
        inner_iterations=counters["inner"],
        thetas=thetas,
        visited=visited,
        trace=trace,
        message=message,
    )


def meta_project_ideal(z, cloud, solver, init=None, max_outer: int = 10_000, eta: float | None = None,
                       trace: bool = False, deadline: float | None = None) -> SolveReport:
    """Subpolytope shifting with an exact-grade inner solver and an (almost) exact stopping test.

    ``eta`` defaults to ``1e-12`` times the squared cloud radius around ``z``.
    The exchange logic assumes exact subproblem answers, so a solver with a
    looser ``epsilon`` runs at ``epsilon = eta`` and every answer is polished
    by an exact affine solve on its support.
    """
    pts = as_points(cloud)
    z = np.asarray(z, dtype=float).reshape(-1)
    ell, d = pts.shape
    if eta is None:
        eta = 1e-12 * cloud_scale(pts, z)
    solver = exact_grade(solver, eta)
    if ell < d + 1:
        return _direct(z, pts, solver, eta, False)
    index_set = _default_init(d, ell, init)
    counters = {"step3": 0, "step4": 0, "inner": 0}
    thetas, visited, records = [], [], []
    n = 0
    while True:
        _check_deadline(deadline)
        alpha, inner = _solve_sub(solver, z, index_set, pts)
        counters["inner"] += inner
        alpha = polish(alpha, index_set, pts, z)
        y = alpha @ pts[index_set]
        state = SubpolytopeState(list(index_set), alpha, y, float(np.linalg.norm(y - z)), n)
        thetas.append(state.theta)
        visited.append(tuple(index_set))
        opt = check_optimality(y, z, pts, eta)
        if trace:
            records.append({"n": n, "I": list(index_set), "theta": state.theta, "worst_value": opt.worst_value})
        if opt.satisfied:
            return _report(state, pts, z, opt, Termination.OPTIMAL, counters, thetas, visited, records)
        if n >= max_outer:
            return _report(state, pts, z, opt, Termination.ITERATION_CAP, counters, thetas, visited, records)
        try:
            decision = steepest_descent_exchange(state, z, pts, removal="index_removal")
        except CorrectionFailure as exc:
            return _report(state, pts, z, opt, Termination.CORRECTION_FAILURE, counters, thetas, visited, records,
                           str(exc))
        index_set[index_set.index(decision.remove_index)] = decision.insert_index
        n += 1


def _blend_toward_affine(alpha, y, index_set, pts, target, eps_zero, theta_bound):
    """One Step-3 style correction: move the weights toward the affine-hull projection of ``target``.

    Returns ``(alpha, y, kind)`` with kind ``"blend"``, ``"adopt"`` or ``"dependent"``
    (the last meaning every affine weight is positive and nothing was changed).
    """
    beta, h = project_affine_hull(index_set, pts, target)
    if abs(beta.sum() - 1.0) > 1e-9:
        raise CorrectionFailure("affine-hull weights do not sum to one")
    slack = 1e-12 * max(1.0, theta_bound)
    if np.linalg.norm(h - target) > np.linalg.norm(y - target) + slack:
        raise CorrectionFailure("affine-hull projection is farther than the current point")
    beta_min = beta.min()
    if beta_min < -eps_zero:
        neg = np.flatnonzero(beta < 0)
        ratios = alpha[neg] / (alpha[neg] - beta[neg])
        lam = float(ratios.min())
        new_alpha = (1 - lam) * alpha + lam * beta
        new_alpha[neg[ratios == lam]] = 0.0
        new_alpha = _renormalized(new_alpha)
        return new_alpha, (1 - lam) * y + lam * h, "blend"
    if beta_min <= eps_zero:
        return _renormalized(beta), h, "adopt"
    return alpha, y, "dependent"


def _caratheodory(alpha, index_set, pts):
    """Step-4 style correction: zero one weight along an affine dependence of the points."""
    gamma, residual = affine_dependence_vector(index_set, pts, pivot=index_set[0])
    neg = np.flatnonzero(gamma < 0)
    if neg.size == 0:
        raise CorrectionFailure("affine dependence vector has no negative entry")
    ratios = -alpha[neg] / gamma[neg]
    lam = float(ratios.min())
    new_alpha = alpha + lam * gamma
    new_alpha[neg[ratios == lam]] = 0.0
    return _renormalized(new_alpha), residual, lam


def correct_coefficients(state: SubpolytopeState, z, cloud, eps_zero: float = EPS_ZERO,
                         theta_prev: float | None = None) -> str:
    """Steps 3-4 of the robust method, applied in place to ``state``.

    Returns ``"step3"`` or ``"step4"`` for the branch taken. ``theta_prev`` is
    the last accepted distance; the corrected distance must stay below it.
    """
    pts = as_points(cloud)
    z = np.asarray(z, dtype=float)
    alpha, y, kind = _blend_toward_affine(state.alpha, state.trial_point, state.index_set, pts, z, eps_zero,
                                          state.theta)
    branch = "step3"
    if kind == "dependent":
        alpha, _, _ = _caratheodory(state.alpha, state.index_set, pts)
        y = alpha @ pts[state.index_set]
        branch = "step4"
    theta = float(np.linalg.norm(y - z))
    if theta_prev is not None and not theta < theta_prev:
        raise CorrectionFailure("corrected distance does not stay below the previous one")
    state.alpha, state.trial_point, state.theta = alpha, y, theta
    state.correction_attempted = True
    return branch


def meta_project_robust(z, cloud, solver, tol: Tolerances | None = None, init=None, trace: bool = False,
                        scaled_stop: bool = False, deadline: float | None = None) -> SolveReport:
    """Subpolytope shifting with an inexact inner solver.

    Stops once ``min_i <y - z, x_i - y> >= -eta``. A failed distance decay
    triggers a single coefficient correction per iteration.
    """
    pts = as_points(cloud)
    z = np.asarray(z, dtype=float).reshape(-1)
    ell, d = pts.shape
    if z.size != d:
        raise ValueError(f"query has dimension {z.size}, cloud has {d}")
    tol = tol or Tolerances(eta=default_eta(d))
    if ell < d + 1:
        return _direct(z, pts, solver, tol.eta, scaled_stop)
    index_set = _default_init(d, ell, init)
    counters = {"step3": 0, "step4": 0, "inner": 0}
    records = []

    alpha, inner = _solve_sub(solver, z, index_set, pts)
    counters["inner"] += inner
    y = alpha @ pts[index_set]
    state = SubpolytopeState(list(index_set), alpha, y, float(np.linalg.norm(y - z)))
    thetas = [state.theta]
    visited = [tuple(index_set)]
    flags = {"step3": False, "step4": False}

    while True:
        _check_deadline(deadline)
        opt = check_optimality(state.trial_point, z, pts, tol.eta, scaled_stop)
        if trace:
            records.append({"n": state.outer_iter, "I": list(state.index_set), "theta": state.theta,
                            "worst_value": opt.worst_value, **flags})
        if opt.satisfied:
            return _report(state, pts, z, opt, Termination.OPTIMAL, counters, thetas, visited, records)
        if state.outer_iter >= tol.max_outer:
            return _report(state, pts, z, opt, Termination.ITERATION_CAP, counters, thetas, visited, records)
        try:
            decision = steepest_descent_exchange(state, z, pts)
        except CorrectionFailure as exc:
            return _report(state, pts, z, opt, Termination.CORRECTION_FAILURE, counters, thetas, visited, records,
                           str(exc))
        next_set = list(state.index_set)
        next_set[next_set.index(decision.remove_index)] = decision.insert_index

        alpha, inner = _solve_sub(solver, z, next_set, pts)
        counters["inner"] += inner
        y = alpha @ pts[next_set]
        theta = float(np.linalg.norm(y - z))
        if theta < state.theta:
            state = SubpolytopeState(next_set, alpha, y, theta, state.outer_iter + 1)
            thetas.append(theta)
            visited.append(tuple(next_set))
            flags = {"step3": False, "step4": False}
            continue

        if state.correction_attempted:
            return _report(state, pts, z, opt, Termination.CORRECTION_FAILURE, counters, thetas, visited, records,
                           "a second coefficient correction was needed within one iteration")
        theta_prev = thetas[-2] if len(thetas) > 1 else None
        try:
            branch = correct_coefficients(state, z, pts, tol.eps_zero, theta_prev)
        except CorrectionFailure as exc:
            return _report(state, pts, z, opt, Termination.CORRECTION_FAILURE, counters, thetas, visited, records,
                           str(exc))
        counters[branch] += 1
        flags[branch] = True
        thetas[-1] = state.theta


def project(z, cloud, options: ProjectOptions | None = None, solver=None, **overrides) -> SolveReport:
    """Project ``z`` onto the convex hull of ``cloud``.

    ``solver`` may be a solver instance; otherwise ``options.solver`` names one.
    """
    options = options or ProjectOptions()
    if overrides:
        options = ProjectOptions(**{**options.__dict__, **overrides})
    pts = as_points(cloud)
    z = np.asarray(z, dtype=float).reshape(-1)
    solver = solver or get_solver(options.solver)
    if options.deadline is not None and hasattr(solver, "deadline"):
        from .solvers import with_deadline

        solver = with_deadline(solver, options.deadline)
    eta = options.eta if options.eta is not None else default_eta(pts.shape[1])
    if not options.accelerate:
        return _direct(z, pts, solver, eta, options.scaled_stop)
    if not options.robust:
        return meta_project_ideal(z, pts, solver, options.init, options.max_outer, options.eta, options.trace,
                                  options.deadline)
    tol = Tolerances(eta=eta, max_outer=options.max_outer)
    return meta_project_robust(z, pts, solver, tol, options.init, options.trace, options.scaled_stop,
                               options.deadline)
