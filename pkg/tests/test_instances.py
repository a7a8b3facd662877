import numpy as np
import pytest

from vbscd.instances import (
    diag_quadratic,
    lasso_1d,
    lasso_random,
    logistic_random,
    matrix_instance,
    quad_1d,
    quadratic_mcp,
    quadratic_scad,
)


def gram_extremes(p):
    eigs = np.linalg.eigvalsh(p.smooth.A.T @ p.smooth.A)
    return float(eigs[0]), float(eigs[-1])


def test_scalar_instances_expose_known_optima():
    point, value = lasso_1d().known_optimum
    assert np.allclose(point, [2.0]) and value == 2.5
    q = quad_1d(1.5)
    point, value = q.known_optimum
    assert np.allclose(point, [1.5]) and value == 0.0
    assert q.objective(np.array([1.5])) == 0.0


def test_diag_quadratic_shapes_and_curvature():
    p = diag_quadratic([1.0, 4.0, 9.0])
    assert p.n == 3 and p.n_blocks == 3
    # declared constant is a safe upper estimate of the true value 9
    assert 9.0 <= p.smooth.lipschitz <= 9.2
    assert np.allclose(p.smooth.grad(np.ones(3)), [1.0, 4.0, 9.0])


def test_random_designs_are_reproducible_and_bounded():
    p1 = lasso_random(n=12, n_blocks=4, seed=3)
    p2 = lasso_random(n=12, n_blocks=4, seed=3)
    x = np.linspace(-1, 1, 12)
    assert p1.objective(x) == p2.objective(x)
    assert np.array_equal(p1.smooth.grad(x), p2.smooth.grad(x))
    lo, hi = gram_extremes(p1)
    assert lo >= 0.5 - 1e-9 and hi <= 2.0 + 1e-9


def test_nonconvex_instances_stay_globally_strongly_convex():
    scad = quadratic_scad(n=10, n_blocks=5, weight=0.3, a=3.7, min_eig=0.5)
    # smooth curvature must beat the penalty's max concavity 1/(a-1)
    assert gram_extremes(scad)[0] > scad.rho_max
    mcp = quadratic_mcp(n=10, n_blocks=5, weight=0.3, gamma=4.0, min_eig=0.5)
    assert gram_extremes(mcp)[0] > mcp.rho_max


def test_logistic_instance_gradient_consistency():
    p = logistic_random(n=6, n_blocks=2, rows=30, seed=8)
    x = 0.1 * np.arange(6.0)
    g = p.smooth.grad(x)
    for j in range(6):
        e = np.zeros(6)
        e[j] = 1e-6
        fd = (p.smooth.value(x + e) - p.smooth.value(x - e)) / 2e-6
        assert g[j] == pytest.approx(fd, abs=1e-5)


def test_matrix_instance_from_explicit_data():
    A = np.array([[2.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    b = np.array([1.0, 2.0, 0.0])
    p = matrix_instance(A, b, "l1", {"lam": 0.5}, n_blocks=2)
    assert p.n == 2 and p.n_blocks == 2
    x = np.array([0.3, -0.7])
    direct = 0.5 * np.sum((A @ x - b) ** 2) + 0.5 * np.abs(x).sum()
    assert p.objective(x) == pytest.approx(direct)
