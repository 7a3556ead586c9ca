"""Nearest point in, and distance between, polytopes given as convex hulls of point clouds."""

from .distance import DistanceOptions, PairReport, distance, meta_distance_ideal, meta_distance_robust
from .geometry import ConvexCoefficients, PointCloud, Tolerances, check_optimality, check_pair_optimality
from .nearest import ProjectOptions, SolveReport, Termination, meta_project_ideal, meta_project_robust, project
from .solvers import get_pair_solver, get_solver

__all__ = [
    "ConvexCoefficients",
    "DistanceOptions",
    "PairReport",
    "PointCloud",
    "ProjectOptions",
    "SolveReport",
    "Termination",
    "Tolerances",
    "check_optimality",
    "check_pair_optimality",
    "distance",
    "get_pair_solver",
    "get_solver",
    "meta_distance_ideal",
    "meta_distance_robust",
    "meta_project_ideal",
    "meta_project_robust",
    "project",
]
