"""Small dense primitives shared by every solver.

Indices are 0-based positions into a point cloud's row array.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

EPS_ZERO = 1e-12
TAU_SUM = 1e-12


@dataclass(frozen=True)
class PointCloud:
    """Indexed set of ``ell`` points in ``R^d`` stored as an ``(ell, d)`` array."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"point cloud must be a non-empty (ell, d) array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def __len__(self):
        return self.size


@dataclass(frozen=True)
class SolverStats:
    inner_iterations: int = 0
    terminated_by: str = "tolerance"  # or "iteration_cap"
    history: tuple = ()


@dataclass(frozen=True)
class ConvexCoefficients:
    """Barycentric weights over an ordered list of distinct cloud indices."""

    support: tuple
    weights: np.ndarray
    stats: SolverStats = field(default_factory=SolverStats, compare=False)

    def __post_init__(self):
        support = tuple(int(i) for i in self.support)
        w = np.array(self.weights, dtype=float, copy=True).reshape(-1)
        if len(support) != w.size:
            raise ValueError("support and weights differ in length")
        if len(set(support)) != len(support):
            raise ValueError("support indices must be distinct")
        if np.any(w < 0):
            raise ValueError("convex weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"convex weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", w)

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.weights.tolist()))

    def dense(self, size: int) -> np.ndarray:
        out = np.zeros(size)
        out[list(self.support)] = self.weights
        return out


@dataclass(frozen=True)
class Tolerances:
    eta: float = 1e-4
    eps_zero: float = EPS_ZERO
    tau_sum: float = TAU_SUM
    max_outer: int = 10_000

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.eps_zero < 0 or self.tau_sum < 0:
            raise ValueError("eps_zero and tau_sum must be nonnegative")
        if self.max_outer < 1:
            raise ValueError("max_outer must be a positive integer")


class Optimality(NamedTuple):
    satisfied: bool
    worst_index: int
    worst_value: float


class PairOptimality(NamedTuple):
    rho_x: float
    rho_y: float
    satisfied: bool
    worst_x: int
    worst_y: int


class AffineProjection(NamedTuple):
    beta: np.ndarray
    h: np.ndarray


def as_points(cloud) -> np.ndarray:
    if isinstance(cloud, PointCloud):
        return cloud.points
    pts = np.asarray(cloud, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.ndim != 2:
        raise ValueError(f"expected an (ell, d) array, got shape {pts.shape}")
    return pts


def _as_vector(v, dim: int, name: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != dim:
        raise ValueError(f"{name} has dimension {v.size}, expected {dim}")
    return v


def _check_indices(indices, size: int) -> np.ndarray:
    idx = np.asarray(indices, dtype=int).reshape(-1)
    if idx.size == 0:
        raise ValueError("index list is empty")
    if idx.min() < 0 or idx.max() >= size:
        raise IndexError(f"index out of range for a cloud of {size} points")
    return idx


def evaluate_point(coeffs: ConvexCoefficients, cloud) -> np.ndarray:
    pts = as_points(cloud)
    idx = _check_indices(coeffs.support, pts.shape[0])
    return coeffs.weights @ pts[idx]


def diameter(cloud) -> float:
    pts = as_points(cloud)
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", diff, diff))))


def check_optimality(y, z, cloud, eta: float = 0.0, scaled: bool = False) -> Optimality:
    """Test ``min_i <y - z, x_i - y> >= -eta`` over the whole cloud.

    With ``scaled`` the slack for point ``i`` is ``eta * ||x_i - y||`` instead.
    """
    pts = as_points(cloud)
    y = _as_vector(y, pts.shape[1], "y")
    z = _as_vector(z, pts.shape[1], "z")
    rel = pts - y
    values = rel @ (y - z)
    if scaled:
        slack = eta * np.linalg.norm(rel, axis=1)
        k = int(np.argmin(values + slack))
        return Optimality(bool(np.all(values >= -slack)), k, float(values[k]))
    k = int(np.argmin(values))
    return Optimality(bool(values[k] >= -eta), k, float(values[k]))


def check_pair_optimality(v, w, cloud_p, cloud_q, eta: float = 0.0) -> PairOptimality:
    pts_p, pts_q = as_points(cloud_p), as_points(cloud_q)
    if pts_p.shape[1] != pts_q.shape[1]:
        raise ValueError("clouds live in different dimensions")
    v = _as_vector(v, pts_p.shape[1], "v")
    w = _as_vector(w, pts_p.shape[1], "w")
    gap = v - w
    vx = (pts_p - v) @ gap
    vy = (pts_q - w) @ (-gap)
    i, j = int(np.argmin(vx)), int(np.argmin(vy))
    rho_x, rho_y = float(vx[i]), float(vy[j])
    return PairOptimality(rho_x, rho_y, rho_x >= -eta and rho_y >= -eta, i, j)


@lru_cache(maxsize=64)
def _sum_zero_basis(k: int) -> np.ndarray:
    # orthonormal basis of {c : sum(c) = 0}, from a Householder reflector mapping 1/sqrt(k) onto e_1
    if k == 1:
        return np.zeros((1, 0))
    u = np.full(k, 1.0 / np.sqrt(k))
    u[0] += 1.0
    reflector = np.eye(k) - np.outer(u, u) / u[0]
    basis = reflector[:, 1:].copy()
    basis.setflags(write=False)
    return basis


def affine_lstsq(blocks: Sequence[np.ndarray], target: np.ndarray, rcond: float = 1e-13):
    """Minimize ``||sum_b B_b^T c_b - target||`` with ``sum(c_b) = 1`` for every block.

    Each block is a ``(k_b, d)`` array of points (use a negated block for a
    difference of hulls). Rank-deficient problems return the solution of least
    Euclidean norm among all minimizers.
    """
    base, cols, bases = [], [], []
    for pts in blocks:
        k = pts.shape[0]
        c0 = np.full(k, 1.0 / k)
        n = _sum_zero_basis(k)
        base.append(c0)
        bases.append(n)
        cols.append(pts.T @ n)
    offset = sum(c0 @ pts for c0, pts in zip(base, blocks)) - target
    design = np.hstack(cols) if cols else np.zeros((target.size, 0))
    if design.shape[1]:
        sol = np.linalg.lstsq(design, -offset, rcond=rcond)[0]
    else:
        sol = np.zeros(0)
    out, pos = [], 0
    for c0, n in zip(base, bases):
        m = n.shape[1]
        out.append(c0 + n @ sol[pos:pos + m])
        pos += m
    return out


def project_affine_hull(indices, cloud, target) -> AffineProjection:
    """Closest point to ``target`` in the affine hull of the selected points."""
    pts = as_points(cloud)
    idx = _check_indices(indices, pts.shape[0])
    target = _as_vector(target, pts.shape[1], "target")
    sub = pts[idx]
    (beta,) = affine_lstsq([sub], target)
    return AffineProjection(beta, beta @ sub)


def affine_dependence_vector(indices, cloud, pivot: int):
    """Least-squares ``gamma`` with ``sum gamma_i x_i ~ 0`` and ``sum gamma = 0``.

    Off-pivot entries solve ``sum gamma_i (x_i - x_pivot) = 0, sum gamma_i = 1``;
    the pivot entry is minus their sum. Returns ``(gamma, residual)`` where
    ``residual`` is the norm of the first block, so callers can reject
    point sets that are not actually dependent.
    """
    pts = as_points(cloud)
    idx = _check_indices(indices, pts.shape[0])
    if idx.size < 2:
        raise ValueError("affine dependence needs at least two indices")
    where = np.flatnonzero(idx == pivot)
    if where.size != 1:
        raise ValueError(f"pivot {pivot} is not among the indices")
    p = int(where[0])
    others = np.delete(np.arange(idx.size), p)
    diffs = pts[idx[others]] - pts[pivot]
    system = np.vstack([diffs.T, np.ones((1, others.size))])
    rhs = np.zeros(system.shape[0])
    rhs[-1] = 1.0
    sol = np.linalg.lstsq(system, rhs, rcond=None)[0]
    gamma = np.zeros(idx.size)
    gamma[others] = sol
    gamma[p] = -sol.sum()
    residual = float(np.linalg.norm(sol @ diffs))
    return gamma, residual


def cloud_scale(cloud, z) -> float:
    """Squared radius of the cloud around ``z``; the unit for relative slacks."""
    pts = as_points(cloud)
    r2 = np.max(np.einsum("ij,ij->i", pts - z, pts - z))
    return float(max(r2, 1e-300))


def parameters_consistent(cloud, z, eps: float, eta: float, theta0: float) -> bool:
    """Sufficient (and conservative) condition linking inner accuracy and stopping slack."""
    pts = as_points(cloud)
    diam = diameter(pts)
    if diam == 0:
        return True
    # dist(z, P) is bounded by theta0, which is enough for a diagnostic
    lhs = max(2 * (diam + theta0) * eps, diam * np.sqrt(max(0.0, 2 * eps * theta0 - eps**2)))
    return bool(lhs < eta <= diam**2)
