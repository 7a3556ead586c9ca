import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import EXCHANGE_CLOUD, WORKED, WORKED_OPT, instances
from polyproj.geometry import (
    ConvexCoefficients,
    PointCloud,
    Tolerances,
    affine_dependence_vector,
    affine_lstsq,
    check_optimality,
    check_pair_optimality,
    cloud_scale,
    diameter,
    evaluate_point,
    parameters_consistent,
    project_affine_hull,
)
from polyproj.solvers import oracle_solve


def test_point_cloud_is_read_only():
    cloud = PointCloud(WORKED)
    assert cloud.dim == 2 and len(cloud) == 4
    with pytest.raises(ValueError):
        cloud.points[0, 0] = 1.0


@pytest.mark.parametrize("bad", [np.zeros((0, 2)), np.array([[np.nan, 0.0]]), np.zeros((2, 2, 2))])
def test_point_cloud_rejects(bad):
    with pytest.raises(ValueError):
        PointCloud(bad)


def test_coefficients_validate():
    with pytest.raises(ValueError):
        ConvexCoefficients((0, 0), [0.5, 0.5])
    with pytest.raises(ValueError):
        ConvexCoefficients((0, 1), [1.5, -0.5])
    with pytest.raises(ValueError):
        ConvexCoefficients((0, 1), [0.5, 0.6])
    c = ConvexCoefficients((2, 3), [7 / 17, 10 / 17])
    assert np.allclose(evaluate_point(c, WORKED), WORKED_OPT)
    assert np.allclose(c.dense(4), [0, 0, 7 / 17, 10 / 17])


def test_tolerances_validate():
    with pytest.raises(ValueError):
        Tolerances(eta=0)
    with pytest.raises(ValueError):
        Tolerances(max_outer=0)


def test_optimality_on_worked_example():
    assert check_optimality(WORKED_OPT, [0, 0], WORKED, eta=1e-12).satisfied
    res = check_optimality([0.0, 2.0], [0, 0], WORKED)
    assert not res.satisfied
    assert res.worst_index == 3 and res.worst_value == pytest.approx(-2.0)


def test_scaled_optimality_uses_point_distances():
    y = np.array([0.0, 2.0])
    # worst raw value is -2 at x_4, whose distance from y is sqrt(5)
    assert check_optimality(y, [0, 0], WORKED, eta=0.9, scaled=True).satisfied
    assert not check_optimality(y, [0, 0], WORKED, eta=0.89, scaled=True).satisfied


def test_pair_optimality_singletons():
    res = check_pair_optimality([1.0, 0.0], [-1.0, 0.0], [[1.0, 0.0]], [[-1.0, 0.0]])
    assert res.satisfied and res.rho_x == 0 and res.rho_y == 0
    res = check_pair_optimality([1.0, 0.0], [-1.0, 0.0], [[1.0, 0.0], [0.0, 0.0]], [[-1.0, 0.0]])
    assert not res.satisfied and res.worst_x == 1 and res.rho_x == pytest.approx(-2.0)


def test_affine_projection_onto_line():
    proj = project_affine_hull([2, 3], EXCHANGE_CLOUD, [0.0, 0.0])
    assert np.allclose(proj.h, [0.0, 1.0])
    assert np.allclose(proj.beta, [0.5, 0.5])


def test_affine_projection_rank_deficient_gives_min_norm_weights():
    proj = project_affine_hull([1, 2, 3], EXCHANGE_CLOUD, [0.0, 0.0])
    assert np.allclose(proj.h, [0.0, 1.0])
    # weights solving -b1 + ... along the line: the least-norm choice puts equal mass on the end points
    assert proj.beta.sum() == pytest.approx(1.0)
    assert np.allclose(proj.beta @ EXCHANGE_CLOUD[[1, 2, 3]], [0.0, 1.0])
    gamma, _ = affine_dependence_vector([1, 2, 3], EXCHANGE_CLOUD, pivot=1)
    assert abs(proj.beta @ gamma) < 1e-12  # orthogonal to the null direction


def test_affine_lstsq_pair_blocks():
    X = np.array([[1.0, 0.0], [1.0, 2.0]])
    Y = np.array([[-1.0, 1.0]])
    a, b = affine_lstsq([X, -Y], np.zeros(2))
    assert np.allclose(a @ X, [1.0, 1.0]) and np.allclose(b @ Y, [-1.0, 1.0])


def test_dependence_vector_collinear_and_independent():
    gamma, res = affine_dependence_vector([1, 2, 3], EXCHANGE_CLOUD, pivot=1)
    assert res < 1e-12 and abs(gamma.sum()) < 1e-12
    assert np.allclose(gamma @ EXCHANGE_CLOUD[[1, 2, 3]], 0, atol=1e-12)
    _, res = affine_dependence_vector([0, 1, 2], EXCHANGE_CLOUD, pivot=0)
    assert res > 1e-3
    with pytest.raises(ValueError):
        affine_dependence_vector([0, 1], EXCHANGE_CLOUD, pivot=3)


def test_diameter_and_scale():
    # (2, 2) to (-2, 1) and (0, 4) to (-2, 1) both have length sqrt(17)
    assert diameter(WORKED) == pytest.approx(np.sqrt(17))
    assert cloud_scale(WORKED, np.zeros(2)) == pytest.approx(16.0)


def test_parameters_consistent():
    assert parameters_consistent(WORKED, np.zeros(2), eps=1e-12, eta=1e-4, theta0=2.0)
    assert not parameters_consistent(WORKED, np.zeros(2), eps=1e-2, eta=1e-4, theta0=2.0)


@given(instances(), st.floats(0, 1), st.integers(0, 11))
def test_slack_bounds_distance_to_optimum(inst, t, j):
    # a point of P passing the test with slack eta is within sqrt(eta) of the projection
    X, z = inst
    ref = oracle_solve(z, range(len(X)), X)
    opt = ref.weights @ X[list(ref.support)]
    y = (1 - t) * opt + t * X[j % len(X)]
    eta = max(0.0, -check_optimality(y, z, X).worst_value)
    assert np.linalg.norm(y - opt) <= np.sqrt(eta) + 1e-9
    # and conversely, being eps away costs at most (diam + dist) * eps of slack
    eps = np.linalg.norm(y - opt)
    bound = (diameter(X) + np.linalg.norm(opt - z)) * eps
    assert check_optimality(y, z, X, eta=bound + 1e-12).satisfied
