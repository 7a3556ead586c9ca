"""Nearest-point and two-polytope distance solvers.

Every nearest-point solver answers ``min ||x - w||`` over ``conv{x_i : i in indices}``
and returns :class:`ConvexCoefficients` whose support is exactly the given
index list (weights may be zero). Pair solvers return one such vector per cloud.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .geometry import (
    ConvexCoefficients,
    SolverStats,
    affine_lstsq,
    as_points,
    check_optimality,
    check_pair_optimality,
)

ZERO_TOL = 1e-12


class SolverTimeout(RuntimeError):
    pass


class OracleGuardError(ValueError):
    pass


def _deadline_hit(deadline):
    return deadline is not None and time.monotonic() > deadline


def _subproblem(w, indices, cloud):
    pts = as_points(cloud)
    idx = np.asarray(indices, dtype=int).reshape(-1)
    if idx.size == 0:
        raise ValueError("index list is empty")
    if idx.min() < 0 or idx.max() >= pts.shape[0]:
        raise IndexError("index out of range")
    if len(set(idx.tolist())) != idx.size:
        raise ValueError("indices must be distinct")
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size != pts.shape[1]:
        raise ValueError(f"query has dimension {w.size}, cloud has {pts.shape[1]}")
    return idx, pts[idx] - w


def _normalized(weights):
    weights = np.where(weights > 0, weights, 0.0)
    return weights / weights.sum()


def _wrap(idx, weights, iterations, capped, history=()):
    stats = SolverStats(iterations, "iteration_cap" if capped else "tolerance", tuple(history))
    return ConvexCoefficients(tuple(idx.tolist()), _normalized(weights), stats)


# --------------------------------------------------------------------------- Wolfe


def wolfe_min_norm(P, eps=1e-10, max_iter=100_000, deadline=None, record=False):
    """Wolfe's major/minor cycle method for the min-norm point of ``conv(rows of P)``.

    Returns ``(weights, major_cycles, capped, history)``. Only points of the
    final corral carry nonzero weight.
    """
    k = P.shape[0]
    norms = np.einsum("ij,ij->i", P, P)
    S = [int(np.argmin(norms))]
    lam = np.array([1.0])
    history = []
    capped = True
    major = 0
    for major in range(1, max_iter + 1):
        if _deadline_hit(deadline):
            raise SolverTimeout("wolfe: deadline exceeded")
        X = lam @ P[S]
        g = P @ X
        J = int(np.argmin(g))
        if g[J] > X @ X - eps or J in S:
            capped = False
            break
        S.append(J)
        lam = np.append(lam, 0.0)
        while True:
            (v,) = affine_lstsq([P[S]], np.zeros(P.shape[1]))
            if record:
                history.append((tuple(S), tuple(v.tolist())))
            if np.all(v > ZERO_TOL):
                lam = v
                break
            pos = np.flatnonzero(v <= ZERO_TOL)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = lam[pos] / (lam[pos] - v[pos])
            ratios = np.where(np.isfinite(ratios), ratios, 0.0)
            theta = float(np.clip(ratios.min(), 0.0, 1.0))
            lam = (1 - theta) * lam + theta * v
            drop = set(pos[ratios <= theta].tolist()) | set(np.flatnonzero(lam <= ZERO_TOL).tolist())
            keep = [p for p in range(len(S)) if p not in drop]
            S = [S[p] for p in keep]
            lam = lam[keep]
            lam = lam / lam.sum()
            if len(S) == 1:
                lam = np.array([1.0])
                break
        if J not in S:
            # the new point left the corral at once: no further progress is possible
            capped = False
            break
    weights = np.zeros(k)
    weights[S] = lam
    return weights, major, capped, history


@dataclass(frozen=True)
class WolfeSolver:
    epsilon: float = 1e-10
    max_iter: int = 100_000
    record: bool = False
    deadline: float | None = None
    name: str = "wolfe"

    def solve(self, w, indices, cloud) -> ConvexCoefficients:
        idx, P = _subproblem(w, indices, cloud)
        weights, it, capped, hist = wolfe_min_norm(P, self.epsilon, self.max_iter, self.deadline, self.record)
        hist = [(tuple(int(idx[p]) for p in S), v) for S, v in hist]
        return _wrap(idx, weights, it, capped, hist)


def wolfe_solve(w, indices, cloud, **config) -> ConvexCoefficients:
    return WolfeSolver(**config).solve(w, indices, cloud)


# --------------------------------------------------------------------------- MDM


def mdm_min_norm(P, eps=1e-8, max_iter=1_000_000, deadline=None):
    """Mitchell-Demyanov-Malozemov weight transfer for the min-norm point of ``conv(rows of P)``."""
    k = P.shape[0]
    norms = np.einsum("ij,ij->i", P, P)
    alpha = np.zeros(k)
    s = int(np.argmin(norms))
    alpha[s] = 1.0
    v = P[s].copy()
    for it in range(max_iter):
        if it % 1024 == 0:
            if _deadline_hit(deadline):
                raise SolverTimeout("mdm: deadline exceeded")
            v = alpha @ P
        g = P @ v
        imin = int(np.argmin(g))
        supp = np.flatnonzero(alpha > 0)
        imax = int(supp[np.argmax(g[supp])])
        delta = g[imax] - g[imin]
        if delta < eps:
            return alpha, it, False
        direction = P[imax] - P[imin]
        t = min(1.0, delta / (alpha[imax] * (direction @ direction)))
        moved = t * alpha[imax]
        if t >= 1.0:
            alpha[imin] += alpha[imax]
            alpha[imax] = 0.0
        else:
            alpha[imax] -= moved
            alpha[imin] += moved
        v = v - moved * direction
    return alpha, max_iter, True


@dataclass(frozen=True)
class MDMSolver:
    epsilon: float = 1e-8
    max_iter: int = 1_000_000
    deadline: float | None = None
    name: str = "mdm"

    def solve(self, w, indices, cloud) -> ConvexCoefficients:
        idx, P = _subproblem(w, indices, cloud)
        alpha, it, capped = mdm_min_norm(P, self.epsilon, self.max_iter, self.deadline)
        return _wrap(idx, alpha, it, capped)


def mdm_solve(w, indices, cloud, **config) -> ConvexCoefficients:
    return MDMSolver(**config).solve(w, indices, cloud)


# --------------------------------------------------------------------------- QP


def active_set_qp(H, c, A, b, x0, tol=1e-10, max_iter=10_000, deadline=None):
    """Primal active-set method for ``min 1/2 x'Hx + c'x  s.t.  Ax = b, x >= 0``.

    ``x0`` must be feasible. Bounds at zero in ``x0`` start in the working set.
    Returns ``(x, iterations, capped)``.
    """
    n = x0.size
    x = x0.astype(float).copy()
    free = x > 0
    scale = max(1.0, float(np.max(np.abs(np.diag(H))))) if n else 1.0
    kkt_tol = tol * scale
    m = A.shape[0]
    released = None
    stalled = set()
    for it in range(1, max_iter + 1):
        if _deadline_hit(deadline):
            raise SolverTimeout("qp: deadline exceeded")
        F = np.flatnonzero(free)
        nf = F.size
        kkt = np.zeros((nf + m, nf + m))
        kkt[:nf, :nf] = H[np.ix_(F, F)]
        kkt[:nf, nf:] = A[:, F].T
        kkt[nf:, :nf] = A[:, F]
        rhs = np.concatenate([-c[F], b])
        sol = np.linalg.lstsq(kkt, rhs, rcond=1e-13)[0]
        step = sol[:nf] - x[F]
        if np.linalg.norm(step) <= 1e-12 * (1.0 + np.linalg.norm(x[F])):
            grad = H[:, F] @ x[F] + c
            nu = grad + A.T @ sol[nf:]
            nu[free] = np.inf
            # bounds released and immediately re-blocked without progress are degenerate
            nu[list(stalled)] = np.inf
            j = int(np.argmin(nu))
            if nu[j] >= -kkt_tol:
                return x, it, False
            free[j] = True
            released = j
            continue
        neg = step < 0
        t = 1.0
        block = -1
        if np.any(neg):
            ratios = x[F][neg] / -step[neg]
            r = int(np.argmin(ratios))
            if ratios[r] < 1.0:
                t = float(ratios[r])
                block = int(F[np.flatnonzero(neg)[r]])
        x[F] += t * step
        if block >= 0:
            x[block] = 0.0
            free[block] = False
            if t == 0.0 and block == released:
                stalled.add(block)
        if t > 0.0:
            stalled.clear()
        released = None
        x[F] = np.maximum(x[F], 0.0)
    return x, max_iter, True


@dataclass(frozen=True)
class QPSolver:
    """Active-set QP on the dense simplex-constrained least-norm problem.

    The Hessian is formed explicitly over all given points, like a
    general-purpose QP routine would; ``max_dense`` bounds its size.
    """

    epsilon: float = 1e-10
    max_iter: int = 10_000
    max_dense: int = 6000
    deadline: float | None = None
    name: str = "qp"

    def solve(self, w, indices, cloud) -> ConvexCoefficients:
        idx, P = _subproblem(w, indices, cloud)
        n = idx.size
        if n > self.max_dense:
            raise ValueError(f"qp: {n} variables exceed the dense limit {self.max_dense}")
        H = P @ P.T
        x0 = np.zeros(n)
        x0[int(np.argmin(np.diag(H)))] = 1.0
        x, it, capped = active_set_qp(
            H, np.zeros(n), np.ones((1, n)), np.ones(1), x0, self.epsilon, self.max_iter, self.deadline
        )
        return _wrap(idx, x, it, capped)


def qp_active_set_solve(w, indices, cloud, **config) -> ConvexCoefficients:
    return QPSolver(**config).solve(w, indices, cloud)


# --------------------------------------------------------------------------- oracle


@dataclass(frozen=True)
class OracleSolver:
    """Brute-force ground truth: best feasible affine-hull projection over all small supports."""

    max_points: int = 12
    max_dim: int = 4
    deadline: float | None = None
    name: str = "oracle"

    def solve(self, w, indices, cloud) -> ConvexCoefficients:
        idx, P = _subproblem(w, indices, cloud)
        n, d = P.shape
        if n > self.max_points or d > self.max_dim:
            raise OracleGuardError(f"oracle refuses {n} points in dimension {d}")
        scale = max(1.0, float(np.max(np.einsum("ij,ij->i", P, P))))
        origin = np.zeros(d)
        best, best_val, count = None, np.inf, 0
        for k in range(1, min(d + 1, n) + 1):
            for S in itertools.combinations(range(n), k):
                count += 1
                (beta,) = affine_lstsq([P[list(S)]], origin)
                if beta.min() < -1e-12:
                    continue
                h = beta @ P[list(S)]
                val = h @ h
                if val < best_val - 1e-14 * scale:
                    best, best_val = (S, beta), val
        weights = np.zeros(n)
        S, beta = best
        weights[list(S)] = np.maximum(beta, 0.0)
        weights /= weights.sum()
        y = weights @ P
        if not check_optimality(y, origin, P, eta=1e-9 * scale).satisfied:
            raise RuntimeError("oracle candidate failed the optimality check")
        return _wrap(idx, weights, count, False)


def oracle_solve(w, indices, cloud, **config) -> ConvexCoefficients:
    return OracleSolver(**config).solve(w, indices, cloud)


# --------------------------------------------------------------------------- pairs


def _pair_subproblem(idx_p, cloud_p, idx_q, cloud_q):
    pts_p, pts_q = as_points(cloud_p), as_points(cloud_q)
    if pts_p.shape[1] != pts_q.shape[1]:
        raise ValueError("clouds live in different dimensions")
    ip = np.asarray(idx_p, dtype=int).reshape(-1)
    iq = np.asarray(idx_q, dtype=int).reshape(-1)
    if ip.size == 0 or iq.size == 0:
        raise ValueError("index lists must be nonempty")
    return ip, pts_p[ip], iq, pts_q[iq]


@dataclass(frozen=True)
class ReductionPairSolver:
    """Distance via the nearest point of the difference cloud ``{x_i - y_j}`` to the origin."""

    inner: object = None
    max_product: int = 10_000

    @property
    def name(self):
        return f"reduce-{self.inner.name}"

    def with_deadline(self, deadline):
        return replace(self, inner=replace(self.inner, deadline=deadline))

    def solve_pair(self, idx_p, cloud_p, idx_q, cloud_q):
        ip, X, iq, Y = _pair_subproblem(idx_p, cloud_p, idx_q, cloud_q)
        if ip.size * iq.size > self.max_product:
            raise ValueError(f"difference cloud of {ip.size * iq.size} points exceeds {self.max_product}")
        # row (a, b) of the difference cloud is x_{ip[a]} - y_{iq[b]}, in lexicographic order
        diff = (X[:, None, :] - Y[None, :, :]).reshape(-1, X.shape[1])
        inner = self.inner.solve(np.zeros(X.shape[1]), np.arange(diff.shape[0]), diff)
        mu = inner.weights.reshape(ip.size, iq.size)
        stats = inner.stats
        alpha = ConvexCoefficients(tuple(ip.tolist()), _normalized(mu.sum(axis=1)), stats)
        beta = ConvexCoefficients(tuple(iq.tolist()), _normalized(mu.sum(axis=0)), stats)
        return alpha, beta


def distance_by_reduction(idx_p, cloud_p, idx_q, cloud_q, inner, max_product: int = 10_000):
    return ReductionPairSolver(inner, max_product).solve_pair(idx_p, cloud_p, idx_q, cloud_q)


@dataclass(frozen=True)
class QPPairSolver:
    """Active-set QP over both coefficient vectors at once."""

    epsilon: float = 1e-10
    max_iter: int = 10_000
    max_dense: int = 6000
    deadline: float | None = None
    name: str = "qp-pair"

    def with_deadline(self, deadline):
        return replace(self, deadline=deadline)

    def solve_pair(self, idx_p, cloud_p, idx_q, cloud_q):
        ip, X, iq, Y = _pair_subproblem(idx_p, cloud_p, idx_q, cloud_q)
        n1, n2 = ip.size, iq.size
        if n1 + n2 > self.max_dense:
            raise ValueError(f"qp: {n1 + n2} variables exceed the dense limit {self.max_dense}")
        M = np.vstack([X, -Y])
        H = M @ M.T
        A = np.zeros((2, n1 + n2))
        A[0, :n1] = 1.0
        A[1, n1:] = 1.0
        x0 = np.zeros(n1 + n2)
        # start from the closest pair among the first point of each side and its best partner
        x0[int(np.argmin(np.einsum("ij,ij->i", X - Y[0], X - Y[0])))] = 1.0
        x0[n1 + int(np.argmin(np.einsum("ij,ij->i", Y - X[0], Y - X[0])))] = 1.0
        x, it, capped = active_set_qp(H, np.zeros(n1 + n2), A, np.ones(2), x0, self.epsilon, self.max_iter, self.deadline)
        stats = SolverStats(it, "iteration_cap" if capped else "tolerance")
        return (
            ConvexCoefficients(tuple(ip.tolist()), _normalized(x[:n1]), stats),
            ConvexCoefficients(tuple(iq.tolist()), _normalized(x[n1:]), stats),
        )


@dataclass(frozen=True)
class PairOracleSolver:
    """Brute force over support pairs ``(S, T)``, each minimized over ``aff(S) x aff(T)``."""

    max_points: int = 12
    max_dim: int = 4
    deadline: float | None = None
    name: str = "oracle-pair"

    def with_deadline(self, deadline):
        return replace(self, deadline=deadline)

    def _search(self, X, Y, max_total):
        d = X.shape[1]
        scale = max(1.0, float(np.max(np.abs(np.vstack([X, Y]))) ** 2))
        best, best_val = None, np.inf
        for k1 in range(1, min(d + 1, X.shape[0]) + 1):
            for k2 in range(1, min(d + 1, Y.shape[0], max_total - k1) + 1):
                for S in itertools.combinations(range(X.shape[0]), k1):
                    for T in itertools.combinations(range(Y.shape[0]), k2):
                        a, b = affine_lstsq([X[list(S)], -Y[list(T)]], np.zeros(d))
                        if a.min() < -1e-12 or b.min() < -1e-12:
                            continue
                        gap = a @ X[list(S)] - b @ Y[list(T)]
                        val = gap @ gap
                        if val < best_val - 1e-14 * scale:
                            best, best_val = (S, a, T, b), val
        if best is None:
            return None
        S, a, T, b = best
        alpha = np.zeros(X.shape[0])
        beta = np.zeros(Y.shape[0])
        alpha[list(S)] = np.maximum(a, 0.0)
        beta[list(T)] = np.maximum(b, 0.0)
        alpha /= alpha.sum()
        beta /= beta.sum()
        if not check_pair_optimality(alpha @ X, beta @ Y, X, Y, eta=1e-9 * scale).satisfied:
            return None
        return alpha, beta

    def solve_pair(self, idx_p, cloud_p, idx_q, cloud_q):
        ip, X, iq, Y = _pair_subproblem(idx_p, cloud_p, idx_q, cloud_q)
        d = X.shape[1]
        if max(ip.size, iq.size) > self.max_points or d > self.max_dim:
            raise OracleGuardError(f"pair oracle refuses sizes {ip.size}+{iq.size} in dimension {d}")
        found = self._search(X, Y, d + 2) or self._search(X, Y, 2 * d + 2)
        if found is None:
            raise RuntimeError("pair oracle found no certified candidate")
        alpha, beta = found
        return (
            ConvexCoefficients(tuple(ip.tolist()), alpha),
            ConvexCoefficients(tuple(iq.tolist()), beta),
        )


# --------------------------------------------------------------------------- registry


def with_deadline(solver, deadline):
    """Copy of a nearest-point or pair solver that raises :class:`SolverTimeout` past ``deadline``."""
    if hasattr(solver, "with_deadline"):
        return solver.with_deadline(deadline)
    return replace(solver, deadline=deadline)

NEAREST_SOLVERS = {"wolfe": WolfeSolver, "mdm": MDMSolver, "qp": QPSolver, "oracle": OracleSolver}
PAIR_SOLVERS = ("qp", "wolfe", "mdm", "qp-pair", "oracle")

_CONFIG_KEYS = {"inner.epsilon": "epsilon", "inner.max_iter": "max_iter"}


def _config_kwargs(config: Mapping | None):
    kwargs = {}
    for key, value in (config or {}).items():
        if key not in _CONFIG_KEYS:
            raise KeyError(f"unknown solver config key {key!r}")
        kwargs[_CONFIG_KEYS[key]] = int(value) if key == "inner.max_iter" else float(value)
    return kwargs


def get_solver(name: str, config: Mapping | None = None):
    """Nearest-point solver by name: ``wolfe``, ``mdm``, ``qp`` or ``oracle``."""
    try:
        cls = NEAREST_SOLVERS[name]
    except KeyError:
        raise KeyError(f"unknown solver {name!r}; choose from {sorted(NEAREST_SOLVERS)}") from None
    kwargs = _config_kwargs(config)
    if cls is OracleSolver and kwargs:
        raise KeyError("the oracle has no tolerance settings")
    return cls(**kwargs)


def get_pair_solver(name: str, config: Mapping | None = None):
    """Pair solver by name; nearest-point names are wrapped in the difference-cloud reduction."""
    if name == "qp-pair":
        return QPPairSolver(**_config_kwargs(config))
    if name == "oracle":
        return PairOracleSolver()
    return ReductionPairSolver(get_solver(name, config))
